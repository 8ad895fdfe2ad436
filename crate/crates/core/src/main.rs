fn main() {
    std::process::exit(latent_spread::cli::main_with_args(std::env::args_os()));
}
