fn main() {
    std::process::exit(formeq::cli::run(std::env::args_os()));
}
