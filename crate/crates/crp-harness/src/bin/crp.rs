fn main() {
    std::process::exit(crp_harness::cli::main_with(std::env::args_os()));
}
