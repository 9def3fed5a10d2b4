fn main() {
    std::process::exit(critwin::run(std::env::args_os()));
}
