fn main() {
    std::process::exit(mtp_core::cli::main_from(std::env::args_os()));
}
