fn main() -> std::process::ExitCode {
    rctopo::cli::main()
}
