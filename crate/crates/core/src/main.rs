fn main() {
    std::process::exit(prop_subsidy::cli::run(std::env::args_os()));
}
