fn main() {
    env_logger::init();
    std::process::exit(imcmc::cli::main());
}
