fn main() {
    std::process::exit(voltplug::host::cli::run(std::env::args_os()));
}
