fn main() {
    let env = kknled_cli::env_out();
    std::process::exit(kknled_cli::main_with(std::env::args_os(), env.as_deref()));
}
