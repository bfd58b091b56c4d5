fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LAGDELAY_LOG", "warn")).init();
    std::process::exit(lagdelay::cli::run(std::env::args_os()));
}
