fn main() {
    std::process::exit(nlmimo_ctl::cli::main_with(std::env::args_os()));
}
