use std::io::{BufRead, Write};

use super::{Answer, Oracle, OracleDescriptor, OracleError, Question, YesNo};

/// Terminal question-and-answer: prints each question and reads `y`/`n`.
pub struct InteractiveOracle<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> InteractiveOracle<R, W> {
    pub fn new(input: R, output: W) -> Self {
        InteractiveOracle { input, output }
    }
}

fn io_err(e: std::io::Error) -> OracleError {
    OracleError::Interactive(e.to_string())
}

impl<R: BufRead, W: Write> Oracle for InteractiveOracle<R, W> {
    fn answer(&mut self, question: &Question) -> Result<Answer, OracleError> {
        loop {
            write!(self.output, "[{}] {} (y/n): ", question.node_id, question.text).map_err(io_err)?;
            self.output.flush().map_err(io_err)?;
            let mut line = String::new();
            if self.input.read_line(&mut line).map_err(io_err)? == 0 {
                return Err(OracleError::Interactive("input closed".into()));
            }
            let reply = line.trim();
            let value = if reply.eq_ignore_ascii_case("y") {
                YesNo::Yes
            } else if reply.eq_ignore_ascii_case("n") {
                YesNo::No
            } else {
                writeln!(self.output, "please answer y or n").map_err(io_err)?;
                continue;
            };
            return Ok(Answer {
                raw: Some(reply.to_string()),
                ..Answer::new(value)
            });
        }
    }

    fn descriptor(&self) -> OracleDescriptor {
        OracleDescriptor::new("interactive", &"terminal", "none")
    }
}
