//! Wikitext to plain text with link anchors.
//!
//! Markup is removed in passes over a buffer of characters, each tagged with
//! the anchor (if any) it belongs to. Paired constructs are matched with a
//! stack, so the innermost pair is always eliminated first. Unmatched
//! delimiters are dropped and never abort the pass.

use super::normalize_title;
use super::RawPage;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharAnchor {
    pub target: String,
    /// First character of the surface in the cleaned text.
    pub start: usize,
    /// One past the last character of the surface.
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StrippedText {
    pub text: String,
    pub anchors: Vec<CharAnchor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cell {
    c: char,
    anchor: u32,
}

/// Link prefixes whose whole construct is dropped (media, categories,
/// interlanguage links are handled separately).
const DROPPED_NAMESPACES: &[&str] = &[
    "file", "image", "media", "category", "datei", "bild", "kategorie", "fichier", "catégorie",
    "archivo", "categoría", "imagen", "файл", "категория", "ファイル", "画像", "カテゴリ",
    "文件", "分类", "category talk",
];

/// Link prefixes that point outside the article namespace; the surface text
/// is kept but no anchor is recorded.
const UNANCHORED_NAMESPACES: &[&str] = &[
    "wikipedia", "wp", "help", "template", "portal", "user", "talk", "special", "wikt",
    "wiktionary", "s", "b", "q", "n", "v", "commons", "wikisource", "wikiquote",
];

/// Tags whose content is dropped along with the tag.
const DROPPED_TAGS: &[&str] = &["ref", "math", "gallery", "timeline", "score", "references", "chem"];

pub fn strip_page(page: &RawPage) -> StrippedText {
    strip_wikitext(&page.wikitext)
}

pub fn strip_wikitext(wikitext: &str) -> StrippedText {
    let decoded = decode_html_entities(wikitext);
    let mut cells: Vec<Cell> = decoded.chars().map(|c| Cell { c, anchor: 0 }).collect();

    remove_comments(&mut cells);
    remove_tags(&mut cells);
    remove_templates_and_tables(&mut cells);
    let mut links = LinkPass::default();
    links.run(&mut cells);
    remove_external_links(&mut cells);
    remove_quote_markup(&mut cells);
    let cells = clean_lines(cells);

    collect_anchors(&cells, &links.targets)
}

fn decode_html_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    const TABLE: &[(&str, &str)] = &[
        ("&nbsp;", " "),
        ("&ndash;", "–"),
        ("&mdash;", "—"),
        ("&quot;", "\""),
        ("&lt;", "<"),
        ("&gt;", ">"),
        ("&amp;", "&"),
    ];
    let mut out = s.to_string();
    for (from, to) in TABLE {
        out = out.replace(from, to);
    }
    out
}

fn matches_at(cells: &[Cell], at: usize, pat: &str) -> bool {
    let mut i = at;
    for p in pat.chars() {
        match cells.get(i) {
            Some(cell) if cell.c == p => i += 1,
            _ => return false,
        }
    }
    true
}

fn matches_at_ci(cells: &[Cell], at: usize, pat: &str) -> bool {
    let mut i = at;
    for p in pat.chars() {
        match cells.get(i) {
            Some(cell) if cell.c.to_ascii_lowercase() == p => i += 1,
            _ => return false,
        }
    }
    true
}

fn find_from(cells: &[Cell], from: usize, pat: &str) -> Option<usize> {
    (from..cells.len()).find(|&i| matches_at(cells, i, pat))
}

fn to_string(cells: &[Cell]) -> String {
    cells.iter().map(|c| c.c).collect()
}

fn remove_comments(cells: &mut Vec<Cell>) {
    let mut i = 0;
    while i < cells.len() {
        if matches_at(cells, i, "<!--") {
            match find_from(cells, i + 4, "-->") {
                Some(end) => {
                    cells.drain(i..end + 3);
                }
                None => {
                    cells.drain(i..i + 4);
                }
            }
        } else {
            i += 1;
        }
    }
}

/// Parses a tag starting at `at` (which holds `<`). Returns
/// (name, is_closing, is_self_closing, index one past `>`).
fn parse_tag(cells: &[Cell], at: usize) -> Option<(String, bool, bool, usize)> {
    let mut i = at + 1;
    let closing = cells.get(i).map(|c| c.c) == Some('/');
    if closing {
        i += 1;
    }
    let name_start = i;
    while i < cells.len() && cells[i].c.is_ascii_alphanumeric() {
        i += 1;
    }
    if i == name_start || !cells[name_start].c.is_ascii_alphabetic() {
        return None;
    }
    let name = to_string(&cells[name_start..i]).to_ascii_lowercase();
    let mut j = i;
    while j < cells.len() && cells[j].c != '>' {
        if cells[j].c == '<' || cells[j].c == '\n' && j - at > 512 {
            return None;
        }
        j += 1;
    }
    if j >= cells.len() {
        return None;
    }
    let self_closing = j > 0 && cells[j - 1].c == '/';
    Some((name, closing, self_closing, j + 1))
}

fn remove_tags(cells: &mut Vec<Cell>) {
    let mut i = 0;
    while i < cells.len() {
        if cells[i].c != '<' {
            i += 1;
            continue;
        }
        let Some((name, closing, self_closing, after)) = parse_tag(cells, i) else {
            i += 1;
            continue;
        };
        if !closing && !self_closing && DROPPED_TAGS.contains(&name.as_str()) {
            let close = format!("</{name}");
            let end = (after..cells.len()).find(|&k| matches_at_ci(cells, k, &close));
            match end.and_then(|k| parse_tag(cells, k).map(|t| t.3)) {
                Some(stop) => {
                    cells.drain(i..stop);
                }
                None => {
                    cells.drain(i..after);
                }
            }
        } else {
            cells.drain(i..after);
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Brace {
    Template,
    Table,
}

fn remove_templates_and_tables(cells: &mut Vec<Cell>) {
    let mut stack: Vec<(usize, Brace)> = Vec::new();
    let mut i = 0;
    while i < cells.len() {
        let opener = if matches_at(cells, i, "{{") {
            Some(Brace::Template)
        } else if matches_at(cells, i, "{|") {
            Some(Brace::Table)
        } else {
            None
        };
        if let Some(kind) = opener {
            stack.push((i, kind));
            i += 2;
            continue;
        }
        let closer = if matches_at(cells, i, "}}") {
            Some(Brace::Template)
        } else if matches_at(cells, i, "|}") {
            Some(Brace::Table)
        } else {
            None
        };
        match closer {
            Some(kind) => match stack.iter().rposition(|&(_, k)| k == kind) {
                Some(pos) => {
                    let (start, _) = stack[pos];
                    stack.truncate(pos);
                    cells.drain(start..i + 2);
                    i = start;
                }
                None if kind == Brace::Template => {
                    cells.drain(i..i + 2);
                }
                // A stray `|}` is ordinary text more often than not.
                None => i += 2,
            },
            None => i += 1,
        }
    }
    for (start, _) in stack.into_iter().rev() {
        cells.drain(start..start + 2);
    }
}

#[derive(Default)]
struct LinkPass {
    /// Indexed by anchor id - 1.
    targets: Vec<String>,
}

enum LinkKind {
    Drop,
    Plain,
    Anchor(String),
}

fn classify_target(raw: &str) -> LinkKind {
    let mut target = raw.trim();
    let leading_colon = target.starts_with(':');
    if leading_colon {
        target = target[1..].trim_start();
    }
    if let Some((prefix, _)) = target.split_once(':') {
        let prefix = prefix.trim().to_lowercase();
        if DROPPED_NAMESPACES.contains(&prefix.as_str()) {
            return if leading_colon { LinkKind::Plain } else { LinkKind::Drop };
        }
        if UNANCHORED_NAMESPACES.contains(&prefix.as_str()) {
            return LinkKind::Plain;
        }
        let is_lang_code = (2..=3).contains(&prefix.chars().count())
            && prefix.chars().all(|c| c.is_ascii_lowercase());
        if is_lang_code && !leading_colon {
            return LinkKind::Drop;
        }
        if is_lang_code {
            return LinkKind::Plain;
        }
    }
    let without_section = target.split('#').next().unwrap_or("");
    let normalized = normalize_title(without_section);
    if normalized.is_empty() {
        LinkKind::Plain
    } else {
        LinkKind::Anchor(normalized)
    }
}

/// Surface for the pipe trick: `[[Foo (bar)|]]` renders as `Foo`.
fn pipe_trick(target: &str) -> String {
    let base = match target.find(" (") {
        Some(k) => &target[..k],
        None => target,
    };
    let base = base.split_once(':').map_or(base, |(_, rest)| rest);
    base.split(',').next().unwrap_or(base).trim().to_string()
}

impl LinkPass {
    fn run(&mut self, cells: &mut Vec<Cell>) {
        let mut stack: Vec<usize> = Vec::new();
        let mut i = 0;
        while i < cells.len() {
            if matches_at(cells, i, "[[") {
                stack.push(i);
                i += 2;
            } else if matches_at(cells, i, "]]") {
                match stack.pop() {
                    Some(start) => i = self.replace(cells, start, i),
                    None => {
                        cells.drain(i..i + 2);
                    }
                }
            } else {
                i += 1;
            }
        }
        for start in stack.into_iter().rev() {
            cells.drain(start..start + 2);
        }
    }

    /// Replaces `cells[start..=close+1]` by the rendered link and returns the
    /// index to resume scanning from.
    fn replace(&mut self, cells: &mut Vec<Cell>, start: usize, close: usize) -> usize {
        let inner = &cells[start + 2..close];
        let pipe = inner.iter().position(|c| c.c == '|');
        let target_cells = &inner[..pipe.unwrap_or(inner.len())];
        let target_str = to_string(target_cells);
        let kind = classify_target(&target_str);

        let mut surface: Vec<Cell> = match pipe {
            Some(p) => {
                let s = &inner[p + 1..];
                if s.iter().all(|c| c.c.is_whitespace()) {
                    pipe_trick(target_str.trim().trim_start_matches(':'))
                        .chars()
                        .map(|c| Cell { c, anchor: 0 })
                        .collect()
                } else {
                    s.to_vec()
                }
            }
            None => {
                let t = target_str.trim();
                t.trim_start_matches(':')
                    .chars()
                    .map(|c| Cell { c, anchor: 0 })
                    .collect()
            }
        };

        match kind {
            LinkKind::Drop => surface.clear(),
            LinkKind::Plain => {}
            LinkKind::Anchor(target) => {
                self.targets.push(target);
                let id = self.targets.len() as u32;
                for cell in surface.iter_mut() {
                    cell.anchor = id;
                }
                // Link trail: `[[bus]]es` renders as an anchored "buses".
                let mut k = close + 2;
                while k < cells.len() && cells[k].c.is_alphabetic() && cells[k].anchor == 0 {
                    cells[k].anchor = id;
                    k += 1;
                }
            }
        }
        let len = surface.len();
        cells.splice(start..close + 2, surface);
        start + len
    }
}

fn remove_external_links(cells: &mut Vec<Cell>) {
    let mut i = 0;
    while i < cells.len() {
        let is_url = cells[i].c == '['
            && (matches_at_ci(cells, i + 1, "http://")
                || matches_at_ci(cells, i + 1, "https://")
                || matches_at(cells, i + 1, "//"));
        if !is_url {
            i += 1;
            continue;
        }
        let close = (i + 1..cells.len()).find(|&k| cells[k].c == ']' || cells[k].c == '\n');
        match close {
            Some(k) if cells[k].c == ']' => {
                let label_start = (i + 1..k).find(|&m| cells[m].c == ' ');
                let label: Vec<Cell> = match label_start {
                    Some(m) => cells[m + 1..k].to_vec(),
                    None => Vec::new(),
                };
                let len = label.len();
                cells.splice(i..k + 1, label);
                i += len;
            }
            _ => {
                cells.remove(i);
            }
        }
    }
}

fn remove_quote_markup(cells: &mut Vec<Cell>) {
    let mut i = 0;
    while i < cells.len() {
        if cells[i].c == '\'' {
            let run = cells[i..].iter().take_while(|c| c.c == '\'').count();
            if run >= 2 {
                cells.drain(i..i + run);
                continue;
            }
            i += run;
        } else {
            i += 1;
        }
    }
}

/// Headings lose their `=` fences, list markers and rules are dropped, and
/// behaviour switches like `__TOC__` are removed.
fn clean_lines(cells: Vec<Cell>) -> Vec<Cell> {
    let mut out = Vec::with_capacity(cells.len());
    for line in cells.split(|c| c.c == '\n') {
        let mut lo = 0;
        let mut hi = line.len();
        while lo < hi && line[lo].c == ' ' {
            lo += 1;
        }
        let text = to_string(&line[lo..hi]);
        if text.starts_with("----") && text.chars().all(|c| c == '-') {
            out.push(Cell { c: '\n', anchor: 0 });
            continue;
        }
        if line[lo..hi].first().map(|c| c.c) == Some('=') {
            while lo < hi && (line[lo].c == '=' || line[lo].c == ' ') {
                lo += 1;
            }
            while hi > lo && (line[hi - 1].c == '=' || line[hi - 1].c == ' ') {
                hi -= 1;
            }
        } else {
            while lo < hi && matches!(line[lo].c, '*' | '#' | ':' | ';') {
                lo += 1;
            }
        }
        let mut k = lo;
        while k < hi {
            if line[k].c == '_' && matches_at(line, k, "__") {
                let word_end = (k + 2..hi).find(|&m| matches_at(line, m, "__"));
                if let Some(m) = word_end {
                    let word = &line[k + 2..m];
                    if !word.is_empty() && word.iter().all(|c| c.c.is_ascii_uppercase()) {
                        k = m + 2;
                        continue;
                    }
                }
            }
            out.push(line[k]);
            k += 1;
        }
        out.push(Cell { c: '\n', anchor: 0 });
    }
    out.pop();
    // Trim surrounding whitespace without disturbing anchor offsets.
    let lead = out.iter().take_while(|c| c.c.is_whitespace()).count();
    let trail = out[lead..].iter().rev().take_while(|c| c.c.is_whitespace()).count();
    out.truncate(out.len() - trail);
    out.drain(..lead);
    out
}

fn collect_anchors(cells: &[Cell], targets: &[String]) -> StrippedText {
    let text = to_string(cells);
    let mut anchors: Vec<CharAnchor> = Vec::new();
    let mut last_id = 0;
    let mut i = 0;
    while i < cells.len() {
        let id = cells[i].anchor;
        if id == 0 {
            i += 1;
            continue;
        }
        let start = i;
        while i < cells.len() && cells[i].anchor == id {
            i += 1;
        }
        let mut lo = start;
        let mut hi = i;
        while lo < hi && cells[lo].c.is_whitespace() {
            lo += 1;
        }
        while hi > lo && cells[hi - 1].c.is_whitespace() {
            hi -= 1;
        }
        if lo == hi {
            continue;
        }
        match anchors.last_mut() {
            Some(prev) if last_id == id => prev.end = hi,
            _ => anchors.push(CharAnchor {
                target: targets[id as usize - 1].clone(),
                start: lo,
                end: hi,
            }),
        }
        last_id = id;
    }
    StrippedText { text, anchors }
}
