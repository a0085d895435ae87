fn main() {
    std::process::exit(occupath::harness::run(std::env::args_os()));
}
