fn main() {
    std::process::exit(reobj_cli::run(std::env::args_os()));
}
