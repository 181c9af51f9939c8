//! Newick reading and writing.
//!
//! Both directions are iterative: trees decoded by single-linkage style
//! merging are often caterpillars whose depth is close to the leaf count.

use crate::data::format_f64;
use crate::error::{Error, Result};

/// One node of a parsed Newick tree.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NewickNode {
    pub name: Option<String>,
    pub length: Option<f64>,
    pub children: Vec<usize>,
}

/// Arena form of a Newick tree. Node ids follow the order of appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct NewickTree {
    pub nodes: Vec<NewickNode>,
    pub root: usize,
}

impl NewickTree {
    /// Leaves in order of appearance.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&v| self.nodes[v].children.is_empty())
            .collect()
    }

    /// Parent links, `None` for the root.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.nodes.len()];
        for (v, n) in self.nodes.iter().enumerate() {
            for &c in &n.children {
                parent[c] = Some(v);
            }
        }
        parent
    }

    /// Serializes with a trailing `;`. The root's length is written only if set.
    pub fn write(&self) -> String {
        enum Step {
            Enter(usize),
            Comma,
            Exit(usize),
        }
        let mut out = String::new();
        let mut stack = vec![Step::Enter(self.root)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Enter(v) => {
                    let node = &self.nodes[v];
                    if node.children.is_empty() {
                        self.write_label(&mut out, v);
                    } else {
                        out.push('(');
                        stack.push(Step::Exit(v));
                        for (i, &c) in node.children.iter().enumerate().rev() {
                            stack.push(Step::Enter(c));
                            if i > 0 {
                                stack.push(Step::Comma);
                            }
                        }
                    }
                }
                Step::Comma => out.push(','),
                Step::Exit(v) => {
                    out.push(')');
                    self.write_label(&mut out, v);
                }
            }
        }
        out.push(';');
        out
    }

    fn write_label(&self, out: &mut String, v: usize) {
        let node = &self.nodes[v];
        if let Some(name) = &node.name {
            out.push_str(&quote_name(name));
        }
        if let Some(len) = node.length {
            out.push(':');
            out.push_str(&format_f64(len));
        }
    }
}

fn quote_name(name: &str) -> String {
    let plain = !name.is_empty() && name.chars().all(|c| !c.is_whitespace() && !"()[]':;,".contains(c));
    if plain {
        name.to_owned()
    } else {
        format!("'{}'", name.replace('\'', "''"))
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Newick {
            position: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    /// Skips whitespace and `[...]` comments.
    fn skip_trivia(&mut self) -> Result<()> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('[') => {
                    let start = self.pos;
                    match self.text[self.pos..].find(']') {
                        Some(off) => self.pos += off + 1,
                        None => {
                            self.pos = start;
                            return Err(self.err("unterminated comment"));
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn label(&mut self) -> Result<Option<String>> {
        self.skip_trivia()?;
        if self.peek() == Some('\'') {
            self.bump();
            let mut name = String::new();
            loop {
                match self.bump() {
                    Some('\'') if self.peek() == Some('\'') => {
                        self.bump();
                        name.push('\'');
                    }
                    Some('\'') => return Ok(Some(name)),
                    Some(c) => name.push(c),
                    None => return Err(self.err("unterminated quoted label")),
                }
            }
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || "()[]':;,".contains(c) {
                break;
            }
            self.bump();
        }
        let raw = &self.text[start..self.pos];
        Ok((!raw.is_empty()).then(|| raw.to_owned()))
    }

    fn length(&mut self) -> Result<Option<f64>> {
        self.skip_trivia()?;
        if self.peek() != Some(':') {
            return Ok(None);
        }
        self.bump();
        self.skip_trivia()?;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || "+-.eE".contains(c) || c.is_ascii_alphabetic() {
                self.bump();
            } else {
                break;
            }
        }
        let raw = &self.text[start..self.pos];
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => {
                self.pos = start;
                Err(self.err(format!("invalid branch length {raw:?}")))
            }
        }
    }
}

/// Parses one Newick tree terminated by `;`.
pub fn parse_newick(text: &str) -> Result<NewickTree> {
    let mut p = Parser { text, pos: 0 };
    let mut nodes: Vec<NewickNode> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    // Set once the node that closes the current position is complete.
    let mut last: Option<usize> = None;

    let attach = |nodes: &mut Vec<NewickNode>, open: &[usize], node: NewickNode| -> usize {
        let id = nodes.len();
        nodes.push(node);
        if let Some(&parent) = open.last() {
            nodes[parent].children.push(id);
        }
        id
    };

    loop {
        p.skip_trivia()?;
        match p.peek() {
            None => return Err(p.err("unexpected end of input (missing ';')")),
            Some('(') => {
                if last.is_some() {
                    return Err(p.err("expected ',' or ')' before '('"));
                }
                p.bump();
                let id = attach(&mut nodes, &open, NewickNode::default());
                open.push(id);
            }
            Some(',') => {
                if open.is_empty() {
                    return Err(p.err("',' outside parentheses"));
                }
                if last.is_none() {
                    return Err(p.err("empty subtree before ','"));
                }
                p.bump();
                last = None;
            }
            Some(')') => {
                if last.is_none() {
                    return Err(p.err("empty subtree before ')'"));
                }
                let Some(id) = open.pop() else {
                    return Err(p.err("unbalanced ')'"));
                };
                p.bump();
                nodes[id].name = p.label()?;
                nodes[id].length = p.length()?;
                last = Some(id);
            }
            Some(';') => {
                if !open.is_empty() {
                    return Err(p.err(format!("{} unclosed '('", open.len())));
                }
                let Some(root) = last else {
                    return Err(p.err("empty tree"));
                };
                p.bump();
                p.skip_trivia()?;
                if p.peek().is_some() {
                    return Err(p.err("trailing characters after ';'"));
                }
                if root != 0 {
                    return Err(p.err("multiple top-level subtrees"));
                }
                return Ok(NewickTree { nodes, root });
            }
            Some(_) => {
                if last.is_some() {
                    return Err(p.err("expected ',' ')' or ';'"));
                }
                let name = p.label()?;
                if name.is_none() {
                    return Err(p.err(format!("unexpected character {:?}", p.peek().unwrap_or(' '))));
                }
                let length = p.length()?;
                let id = attach(
                    &mut nodes,
                    &open,
                    NewickNode {
                        name,
                        length,
                        children: Vec::new(),
                    },
                );
                last = Some(id);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lengths_and_names() {
        let t = parse_newick("((a:1,b:2)ab:0.5,c:3.25);").unwrap();
        assert_eq!(t.nodes.len(), 5);
        assert_eq!(t.leaves().len(), 3);
        assert_eq!(t.nodes[t.root].children.len(), 2);
        assert_eq!(t.nodes[1].name.as_deref(), Some("ab"));
        assert_eq!(t.nodes[4].length, Some(3.25));
    }

    #[test]
    fn write_roundtrip() {
        let text = "((a:1.0,b:2.0)ab:0.5,'odd name':3.25)root;";
        let t = parse_newick(text).unwrap();
        assert_eq!(t.write(), text);
    }

    #[test]
    fn comments_and_whitespace() {
        let t = parse_newick(" ( a : 1 [note] , b:1 ) ;\n").unwrap();
        assert_eq!(t.leaves().len(), 2);
    }

    #[test]
    fn errors_carry_positions() {
        for bad in ["((a,b);", "(a,b));", "(a,b)", "(a,,b);", "(a:x,b);", "(a,b);c", "();"] {
            match parse_newick(bad) {
                Err(Error::Newick { .. }) => {}
                other => panic!("{bad:?} gave {other:?}"),
            }
        }
        match parse_newick("((a,b);") {
            Err(Error::Newick { position, .. }) => assert_eq!(position, 6),
            _ => unreachable!(),
        }
    }

    #[test]
    fn deep_caterpillar() {
        let depth = 20_000;
        let mut s = String::new();
        for _ in 0..depth {
            s.push('(');
        }
        s.push_str("x0");
        for i in 1..=depth {
            s.push_str(&format!(",x{i}:1.0)"));
        }
        s.push(';');
        let t = parse_newick(&s).unwrap();
        assert_eq!(t.leaves().len(), depth + 1);
        assert_eq!(t.write(), s);
    }
}
