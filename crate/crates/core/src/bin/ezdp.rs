fn main() {
    std::process::exit(ezdp::cli::run(std::env::args_os()));
}
