fn main() {
    std::process::exit(scatterlab::stability_lab::cli_main(std::env::args_os()));
}
