fn main() {
    std::process::exit(bisectfl::cli::main_with(std::env::args_os()));
}
