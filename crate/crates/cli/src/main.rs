fn main() {
    std::process::exit(glrstar_cli::run());
}
