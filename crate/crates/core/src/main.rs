fn main() {
    std::process::exit(twin_assets::cli::run(std::env::args_os()));
}
