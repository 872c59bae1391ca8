fn main() {
    std::process::exit(ssbplan_core::cli::main_with_args(std::env::args_os()));
}
