fn main() {
    // Command-line driver lands after the solver stack.
}
