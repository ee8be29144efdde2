fn main() {
    std::process::exit(proxnav::io::cli::cli_main(std::env::args_os()));
}
