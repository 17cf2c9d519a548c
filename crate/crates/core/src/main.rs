fn main() {
    std::process::exit(charprob::cli::main_with_args(std::env::args_os()));
}
