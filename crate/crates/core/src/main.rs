fn main() {
    std::process::exit(r3bp_diffusion::cli::run(std::env::args_os()));
}
