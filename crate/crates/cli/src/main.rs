fn main() {
    let code = match surf_cli::parse_args(std::env::args_os().skip(1)) {
        Ok(plan) => surf_cli::execute(&plan),
        Err(e) => {
            if e.exit_code == 0 {
                print!("{e}");
            } else {
                eprint!("{e}");
                if !e.message.ends_with('\n') {
                    eprintln!();
                }
            }
            e.exit_code
        }
    };
    std::process::exit(code);
}
