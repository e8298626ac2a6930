//! Pulling kernel source out of free-form model responses.

/// Returns the contents of the last fenced code block, or failing that the
/// longest `void test(` function found by brace matching.
pub fn extract_code_block(response: &str) -> Option<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in response.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(lines) => blocks.push(lines.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(lines) = current.as_mut() {
            lines.push(line);
        }
    }
    // An unterminated trailing fence still counts as a block.
    if let Some(lines) = current {
        blocks.push(lines.join("\n"));
    }
    if let Some(last) = blocks.pop() {
        return Some(last);
    }
    unfenced_function(response)
}

fn unfenced_function(text: &str) -> Option<String> {
    let mut best: Option<&str> = None;
    let mut search_from = 0;
    while let Some(rel) = text[search_from..].find("void test(") {
        let start_kw = search_from + rel;
        let line_start = text[..start_kw].rfind('\n').map(|i| i + 1).unwrap_or(0);
        if let Some(end) = matching_brace_end(text, start_kw) {
            let region = &text[line_start..end];
            if best.is_none_or(|b| region.len() > b.len()) {
                best = Some(region);
            }
        }
        search_from = start_kw + "void test(".len();
    }
    best.map(str::to_string)
}

/// Byte offset just past the brace closing the first `{` after `from`.
fn matching_brace_end(text: &str, from: usize) -> Option<usize> {
    let open = from + text[from..].find('{')?;
    let mut depth = 0usize;
    for (i, c) in text[open..].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_fenced_block_wins() {
        let r = "Plan:\n```c\nvoid test() { fence(); }\n```\nbetter:\n```\nvoid test() {}\n```\n";
        assert_eq!(extract_code_block(r).as_deref(), Some("void test() {}"));
    }

    #[test]
    fn prose_only_is_none() {
        assert_eq!(extract_code_block("I would tile the loops by 32."), None);
    }

    #[test]
    fn unfenced_function_by_brace_matching() {
        let r = "Here you go.\nvoid test(int8_t A[4][4]) {\n  for (int i = 0; i < 1; i++) {\n    fence();\n  }\n}\nThat's all {folks}.";
        let code = extract_code_block(r).unwrap();
        assert!(code.starts_with("void test(int8_t A[4][4]) {"));
        assert!(code.ends_with("    fence();\n  }\n}"));
    }

    #[test]
    fn unbalanced_unfenced_is_none() {
        assert_eq!(extract_code_block("void test() {\n fence();\n"), None);
    }
}
