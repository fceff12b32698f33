fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NATGRAD_LOG", "warn")).init();
    std::process::exit(natgrad::harness::run(std::env::args_os()));
}
