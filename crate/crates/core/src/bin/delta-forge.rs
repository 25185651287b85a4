fn main() -> std::process::ExitCode {
    delta_forge::cli::main()
}
