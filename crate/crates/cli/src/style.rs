use std::io::IsTerminal;

use anstyle::{AnsiColor, Style};

/// Terminal styling, off when stdout is not a terminal or
/// `PIFORGE_NO_COLOR` is set.
#[derive(Debug, Clone, Copy)]
pub struct Styles {
    enabled: bool,
}

const ERROR: Style = AnsiColor::Red.on_default().bold();
const WARNING: Style = AnsiColor::Yellow.on_default().bold();
const OK: Style = AnsiColor::Green.on_default().bold();
const HEADING: Style = Style::new().bold();

impl Styles {
    pub fn detect() -> Self {
        Styles {
            enabled: std::env::var_os("PIFORGE_NO_COLOR").is_none()
                && std::io::stdout().is_terminal(),
        }
    }

    fn paint(self, style: Style, text: &str) -> String {
        if self.enabled {
            format!("{style}{text}{style:#}")
        } else {
            text.to_string()
        }
    }

    pub fn error(self, text: &str) -> String {
        self.paint(ERROR, text)
    }

    pub fn warning(self, text: &str) -> String {
        self.paint(WARNING, text)
    }

    pub fn ok(self, text: &str) -> String {
        self.paint(OK, text)
    }

    pub fn heading(self, text: &str) -> String {
        self.paint(HEADING, text)
    }
}
