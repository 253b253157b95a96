fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RELGRID_LOG", "warn")).init();
    std::process::exit(relgrid::cli::run(std::env::args_os()));
}
