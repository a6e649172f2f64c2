fn main() {
    std::process::exit(gllod::cli::main(std::env::args_os()));
}
