fn main() {
    std::process::exit(friedrichs_wcl::cli::run(std::env::args_os()));
}
