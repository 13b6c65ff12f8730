fn main() -> std::process::ExitCode {
    inar_core::cli::main()
}
