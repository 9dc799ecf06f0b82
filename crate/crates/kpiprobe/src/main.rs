fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KPIPROBE_LOG", "warn")).init();
    std::process::exit(kpiprobe::cli::run(std::env::args_os()));
}
