fn main() {
    std::process::exit(energy_lab::cli::run(std::env::args_os()));
}
