fn main() -> std::process::ExitCode {
    gvn_cli::main_entry()
}
