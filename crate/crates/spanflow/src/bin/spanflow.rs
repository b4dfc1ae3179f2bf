fn main() {
    spanflow::cli::main_with_exit();
}
