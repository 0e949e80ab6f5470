fn main() {
    std::process::exit(regret_bw_cli::run(std::env::args_os()));
}
