fn main() {
    std::process::exit(weakchaos::cli::main_with_args(std::env::args_os()));
}
