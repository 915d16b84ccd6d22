//! Line-oriented reader for the versioned structured-text model formats.

use crate::error::{Error, Result};

pub(crate) struct TextReader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
    context: String,
}

impl<'a> TextReader<'a> {
    pub fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines(),
            line_no: 0,
            context: String::new(),
        }
    }

    /// Sets the context reported by errors (e.g. "tree 3 node 5").
    pub fn set_context(&mut self, context: impl Into<String>) {
        self.context = context.into();
    }

    pub fn describe(&self) -> String {
        if self.context.is_empty() {
            format!("line {}", self.line_no)
        } else {
            format!("line {} ({})", self.line_no, self.context)
        }
    }

    /// Next non-empty line, or a parse error mentioning the position.
    pub fn next_line(&mut self) -> Result<&'a str> {
        loop {
            self.line_no += 1;
            match self.lines.next() {
                Some(line) if line.trim().is_empty() => continue,
                Some(line) => return Ok(line.trim()),
                None => {
                    return Err(Error::Parse(format!(
                        "unexpected end of file after {}",
                        self.describe()
                    )))
                }
            }
        }
    }

    /// Reads a line and strips a required leading keyword.
    pub fn expect(&mut self, keyword: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        match line.strip_prefix(keyword) {
            Some(rest) if rest.is_empty() || rest.starts_with(' ') => Ok(rest.trim_start()),
            _ => Err(Error::Parse(format!(
                "{}: expected `{keyword}`, got `{line}`",
                self.describe()
            ))),
        }
    }

    pub fn parse_fields<'b, const N: usize>(&self, rest: &'b str) -> Result<[&'b str; N]> {
        let fields: Vec<&'b str> = rest.split_whitespace().collect();
        if fields.len() != N {
            return Err(Error::Parse(format!(
                "{}: expected {N} fields, got {} in `{rest}`",
                self.describe(),
                fields.len()
            )));
        }
        Ok(std::array::from_fn(|i| fields[i]))
    }

    pub fn parse_f64(&self, field: &str) -> Result<f64> {
        field.parse().map_err(|_| {
            Error::Parse(format!(
                "{}: `{field}` is not a number",
                self.describe()
            ))
        })
    }

    pub fn parse_usize(&self, field: &str) -> Result<usize> {
        field.parse().map_err(|_| {
            Error::Parse(format!(
                "{}: `{field}` is not a non-negative integer",
                self.describe()
            ))
        })
    }

    pub fn parse_u64(&self, field: &str) -> Result<u64> {
        field.parse().map_err(|_| {
            Error::Parse(format!(
                "{}: `{field}` is not a non-negative integer",
                self.describe()
            ))
        })
    }
}
