fn main() {
    std::process::exit(osgood::cli::run());
}
