fn main() { std::process::exit(severity_seq::cli::main()) }
