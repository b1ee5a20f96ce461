fn main() -> std::process::ExitCode {
    pamlab::cli::main()
}
