//! Command-line front end. [`run`] parses arguments, executes one command
//! and writes its report; the binary is a thin wrapper around it.

pub mod cli;
pub mod commands;
pub mod error;
pub mod files;
pub mod report;
pub mod selftest;

use std::io::Write;

use clap::Parser;

use crate::cli::{Cli, Command, Common, ParamCommand};
use crate::commands::Outcome;
use crate::error::CliError;
use crate::files::{write_atomic, Inputs};
use crate::report::Report;

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Certify(a) => &a.common,
        Command::Param(ParamCommand::Gen(a)) => &a.common,
        Command::Param(ParamCommand::Invert(a)) => &a.common,
        Command::Transform(a) => &a.common,
        Command::Synth(a) => &a.common,
        Command::Simulate(a) => &a.common,
        Command::Track(a) => &a.common,
        Command::Selftest(a) => &a.common,
    }
}

fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Certify(_) => "certify",
        Command::Param(ParamCommand::Gen(_)) => "param gen",
        Command::Param(ParamCommand::Invert(_)) => "param invert",
        Command::Transform(_) => "transform",
        Command::Synth(_) => "synth",
        Command::Simulate(_) => "simulate",
        Command::Track(_) => "track",
        Command::Selftest(_) => "selftest",
    }
}

fn execute(
    cmd: &Command,
    inputs: &mut Inputs,
    stderr: &mut dyn Write,
) -> Result<Outcome, CliError> {
    match cmd {
        Command::Certify(a) => commands::certify(a, inputs),
        Command::Param(ParamCommand::Gen(a)) => commands::param_gen(a, inputs),
        Command::Param(ParamCommand::Invert(a)) => commands::param_invert(a, inputs),
        Command::Transform(a) => commands::transform(a, inputs),
        Command::Synth(a) => commands::synth(a, inputs),
        Command::Simulate(a) => commands::simulate(a, inputs),
        Command::Track(a) => commands::track_cmd(a, inputs),
        Command::Selftest(a) => selftest::selftest(a.common.seed, stderr),
    }
}

/// Runs one invocation and returns the exit code: `0` on success, `2` on a
/// negative mathematical outcome, `1` on usage, IO or parse errors.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let opts = common(&cli.command).clone();
    let mut inputs = Inputs::default();
    let result = execute(&cli.command, &mut inputs, stderr);
    let (mut report, exit, trace) = match result {
        Ok(o) => (o.report, o.exit, o.trace),
        Err(e) if e.exit_code() == 2 => {
            let _ = writeln!(stderr, "{e}");
            let mut report = Report::new(name(&cli.command), opts.seed);
            report.status = "failed".into();
            report.note("error", e.to_string());
            (report, 2, None)
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 1;
        }
    };
    report.inputs = inputs.into_records();
    if let Some((path, csv)) = trace {
        if let Err(e) = write_atomic(&path, csv.as_bytes()) {
            let _ = writeln!(stderr, "error: {e}");
            return 1;
        }
    }
    let bytes = report.to_bytes();
    match &opts.out {
        Some(path) => {
            if let Err(e) = write_atomic(path, &bytes) {
                let _ = writeln!(stderr, "error: {e}");
                return 1;
            }
        }
        None => {
            if stdout.write_all(&bytes).is_err() {
                return 1;
            }
        }
    }
    exit
}
