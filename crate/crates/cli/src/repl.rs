//! Line-oriented interactive shell.

use std::io::{self, BufRead, IsTerminal, Write};
use std::path::Path;

use crate::session::{goal, Outcome, Session};

const HELP: &str = "\
?- GOAL.      run GOAL as a transaction
:fixpoint     show each stratum's model
:strata       show the stratification
:edb          show the current facts
:save FILE    write the current facts to FILE
:undo         restore the facts before the last commit
:quit         leave
";

enum Step {
    Continue,
    Quit,
}

fn command(session: &mut Session, line: &str) -> Outcome<(String, Step)> {
    let (cmd, arg) = line.split_once(char::is_whitespace).map_or((line, ""), |(c, a)| (c, a.trim()));
    let text = match cmd {
        ":quit" | ":q" => return Ok((String::new(), Step::Quit)),
        ":help" | ":h" => HELP.to_string(),
        ":fixpoint" => session.fixpoint()?,
        ":strata" => session.strata()?,
        ":edb" => session.edb(),
        ":undo" => session.undo()?,
        ":save" if !arg.is_empty() => session.save(Path::new(arg))?,
        ":save" => return Err(crate::session::Failure::usage(":save needs a file name")),
        _ if cmd.starts_with(':') => return Err(crate::session::Failure::usage(format!("unknown command {cmd}; try :help"))),
        _ => session.transaction(&goal(line)?)?.0,
    };
    Ok((text, Step::Continue))
}

/// Reads commands until `:quit` or end of input. Errors are reported and
/// the loop goes on.
pub fn run(session: &mut Session, input: impl BufRead, mut out: impl Write, mut err: impl Write) -> io::Result<()> {
    let interactive = io::stdin().is_terminal();
    let prompt = |out: &mut dyn Write| -> io::Result<()> {
        if interactive {
            write!(out, "udl> ")?;
            out.flush()?;
        }
        Ok(())
    };
    prompt(&mut out)?;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if !line.is_empty() && !line.starts_with('%') {
            match command(session, line) {
                Ok((text, Step::Quit)) => {
                    write!(out, "{text}")?;
                    return Ok(());
                }
                Ok((text, Step::Continue)) => write!(out, "{text}")?,
                Err(f) => writeln!(err, "error: {}", f.msg)?,
            }
        }
        prompt(&mut out)?;
    }
    Ok(())
}
