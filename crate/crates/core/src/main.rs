fn main() {
    std::process::exit(velomule::cli::cli_main(std::env::args_os()));
}
