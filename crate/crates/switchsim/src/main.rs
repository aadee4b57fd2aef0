fn main() {
    std::process::exit(switchsim::cli::run_cli());
}
