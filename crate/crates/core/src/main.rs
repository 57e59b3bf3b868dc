fn main() -> std::process::ExitCode {
    mfbm::cli::run()
}
