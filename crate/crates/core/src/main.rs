fn main() -> std::process::ExitCode {
    tndsim::cli::main()
}
