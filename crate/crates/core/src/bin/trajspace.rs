use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::new().filter("TH_LOG")).init();
    std::process::exit(trajspace::cli::run(std::env::args_os()));
}
