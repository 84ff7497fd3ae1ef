fn main() {
    std::process::exit(paretofact::run());
}
