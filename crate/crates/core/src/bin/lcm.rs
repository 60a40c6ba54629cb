fn main() {
    std::process::exit(latent_class::cli::main_with_args(std::env::args_os()));
}
