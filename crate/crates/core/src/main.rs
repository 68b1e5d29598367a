fn main() {
    std::process::exit(switchgame::cli::dispatch(std::env::args_os()));
}
