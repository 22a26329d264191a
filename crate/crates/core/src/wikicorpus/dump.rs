//! Streaming reader for MediaWiki XML exports.
//!
//! Only the fields needed downstream are kept: `title`, `ns`, the
//! `redirect` attribute and the text of the (single) revision. Pages are
//! yielded in document order and the reader never holds more than one page.

use std::io::BufRead;

use log::warn;
use quick_xml::events::Event;
use quick_xml::Reader;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPage {
    pub title: String,
    pub namespace: i64,
    pub redirect_target: Option<String>,
    pub wikitext: String,
    pub language: String,
}

impl RawPage {
    pub fn is_redirect(&self) -> bool {
        self.redirect_target.is_some()
    }

    pub fn is_content(&self) -> bool {
        self.namespace == 0 && !self.is_redirect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    None,
    Title,
    Ns,
    Text,
}

/// Iterator over the pages of a dump. Create with [`parse_dump`].
pub struct PageReader<R: BufRead> {
    reader: Reader<R>,
    language: String,
    buf: Vec<u8>,
    title: String,
    ns: String,
    redirect: Option<String>,
    text: String,
    in_page: bool,
    in_revision: bool,
    field: Field,
    root_open: bool,
    pages: usize,
    done: bool,
}

pub fn parse_dump<R: BufRead>(stream: R, language: &str) -> PageReader<R> {
    let mut reader = Reader::from_reader(stream);
    reader.config_mut().trim_text(false);
    PageReader {
        reader,
        language: language.to_string(),
        buf: Vec::new(),
        title: String::new(),
        ns: String::new(),
        redirect: None,
        text: String::new(),
        in_page: false,
        in_revision: false,
        field: Field::None,
        root_open: false,
        pages: 0,
        done: false,
    }
}

fn predefined_entity(name: &str) -> Option<char> {
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        _ => return None,
    })
}

impl<R: BufRead> PageReader<R> {
    /// Pages yielded so far, including skipped ones.
    pub fn complete_pages(&self) -> usize {
        self.pages
    }

    /// Bytes held by the reader's internal buffers. Bounded by the largest
    /// page seen, independent of the dump size.
    pub fn buffered_bytes(&self) -> usize {
        self.buf.capacity()
            + self.title.capacity()
            + self.ns.capacity()
            + self.text.capacity()
            + self.redirect.as_ref().map_or(0, |s| s.capacity())
    }

    fn fail(&mut self, offset: u64, message: impl Into<String>) -> Error {
        self.done = true;
        Error::Dump {
            offset,
            pages: self.pages,
            message: message.into(),
        }
    }

    fn push_field(&mut self, s: &str) {
        match self.field {
            Field::Title => self.title.push_str(s),
            Field::Ns => self.ns.push_str(s),
            Field::Text => self.text.push_str(s),
            Field::None => {}
        }
    }

    fn reset_page(&mut self) {
        self.title.clear();
        self.ns.clear();
        self.text.clear();
        self.redirect = None;
        self.in_revision = false;
        self.field = Field::None;
    }

    fn finish_page(&mut self) -> Option<RawPage> {
        self.pages += 1;
        self.in_page = false;
        let title = self.title.trim();
        if title.is_empty() {
            warn!("skipping page {} without a title", self.pages);
            return None;
        }
        let namespace = self.ns.trim().parse().unwrap_or(0);
        Some(RawPage {
            title: title.to_string(),
            namespace,
            redirect_target: self.redirect.take(),
            wikitext: std::mem::take(&mut self.text),
            language: self.language.clone(),
        })
    }

    fn next_page(&mut self) -> Result<Option<RawPage>> {
        loop {
            self.buf.clear();
            let event = match self.reader.read_event_into(&mut self.buf) {
                Ok(ev) => ev,
                Err(e) => {
                    let pos = self.reader.error_position();
                    return Err(self.fail(pos, e.to_string()));
                }
            };
            match event {
                Event::Start(e) => {
                    let name = e.local_name();
                    match name.as_ref() {
                        b"mediawiki" => self.root_open = true,
                        b"page" => {
                            self.reset_page();
                            self.in_page = true;
                        }
                        b"revision" if self.in_page => self.in_revision = true,
                        b"title" if self.in_page && !self.in_revision => self.field = Field::Title,
                        b"ns" if self.in_page && !self.in_revision => self.field = Field::Ns,
                        b"text" if self.in_revision => self.field = Field::Text,
                        _ => {}
                    }
                }
                Event::Empty(e) => {
                    if self.in_page && e.local_name().as_ref() == b"redirect" {
                        let target = match e.try_get_attribute("title") {
                            Ok(Some(attr)) => attr
                                .unescape_value()
                                .map(|v| v.into_owned())
                                .unwrap_or_default(),
                            _ => String::new(),
                        };
                        self.redirect = Some(target);
                    }
                }
                Event::End(e) => {
                    let name = e.local_name();
                    match name.as_ref() {
                        b"page" if self.in_page => {
                            let page = self.finish_page();
                            if page.is_some() {
                                return Ok(page);
                            }
                        }
                        b"revision" => self.in_revision = false,
                        b"title" | b"ns" | b"text" => self.field = Field::None,
                        b"mediawiki" => self.root_open = false,
                        _ => {}
                    }
                }
                Event::Text(t) => {
                    if self.field != Field::None {
                        let s = t
                            .decode()
                            .map_err(|e| e.to_string())
                            .map(|c| c.into_owned());
                        match s {
                            Ok(s) => self.push_field(&s),
                            Err(msg) => {
                                let pos = self.reader.buffer_position();
                                return Err(self.fail(pos, msg));
                            }
                        }
                    }
                }
                Event::CData(t) => {
                    if self.field != Field::None {
                        let s = String::from_utf8_lossy(&t).into_owned();
                        self.push_field(&s);
                    }
                }
                Event::GeneralRef(r) => {
                    if self.field != Field::None {
                        let resolved = if r.is_char_ref() {
                            r.resolve_char_ref().ok().flatten()
                        } else {
                            let name = String::from_utf8_lossy(&r).into_owned();
                            predefined_entity(&name)
                        };
                        match resolved {
                            Some(c) => {
                                let mut tmp = [0u8; 4];
                                let s: &str = c.encode_utf8(&mut tmp);
                                let s = s.to_string();
                                self.push_field(&s);
                            }
                            None => {
                                let pos = self.reader.buffer_position();
                                return Err(self.fail(pos, "unknown entity reference"));
                            }
                        }
                    }
                }
                Event::Eof => {
                    if self.in_page || self.root_open {
                        let pos = self.reader.buffer_position();
                        return Err(self.fail(pos, "unexpected end of dump inside an open element"));
                    }
                    self.done = true;
                    return Ok(None);
                }
                _ => {}
            }
        }
    }
}

impl<R: BufRead> Iterator for PageReader<R> {
    type Item = Result<RawPage>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        self.next_page().transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = r#"<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/" version="0.10" xml:lang="en">
  <siteinfo><sitename>Wikipedia</sitename></siteinfo>
"#;

    fn page(title: &str, ns: i64, redirect: Option<&str>, text: &str) -> String {
        let redirect = redirect
            .map(|r| format!("<redirect title=\"{r}\" />"))
            .unwrap_or_default();
        format!(
            "  <page>\n    <title>{title}</title>\n    <ns>{ns}</ns>\n    <id>1</id>\n    {redirect}\n    <revision>\n      <id>2</id>\n      <text bytes=\"1\" xml:space=\"preserve\">{text}</text>\n    </revision>\n  </page>\n"
        )
    }

    fn collect(xml: &str) -> Result<Vec<RawPage>> {
        parse_dump(xml.as_bytes(), "en").collect()
    }

    #[test]
    fn header_only_dump_is_empty() {
        let xml = format!("{HEADER}</mediawiki>");
        assert!(collect(&xml).unwrap().is_empty());
    }

    #[test]
    fn content_and_redirect_pages() {
        let xml = format!(
            "{HEADER}{}{}{}</mediawiki>",
            page("Japan", 0, None, "'''Japan''' is an island country."),
            page("JP", 0, Some("Japan"), "#REDIRECT [[Japan]]"),
            page("Tokyo", 0, None, "Capital of [[Japan]] &amp; more &lt;b&gt;"),
        );
        let pages = collect(&xml).unwrap();
        assert_eq!(pages.len(), 3);
        assert_eq!(pages.iter().filter(|p| p.is_redirect()).count(), 1);
        assert_eq!(pages[1].redirect_target.as_deref(), Some("Japan"));
        assert_eq!(pages[2].wikitext, "Capital of [[Japan]] & more <b>");
        assert_eq!(pages[0].language, "en");
        assert!(pages[0].is_content());
    }

    #[test]
    fn truncated_dump_reports_complete_pages() {
        let full = format!(
            "{HEADER}{}{}",
            page("A", 0, None, "alpha"),
            page("B", 0, None, "beta")
        );
        let cut = full.rfind("<revision>").unwrap();
        let truncated = &full[..cut + 5];
        let mut pages = 0;
        let mut err = None;
        for item in parse_dump(truncated.as_bytes(), "en") {
            match item {
                Ok(_) => pages += 1,
                Err(e) => err = Some(e),
            }
        }
        assert_eq!(pages, 1);
        match err.expect("truncation must be reported") {
            Error::Dump { pages, offset, .. } => {
                assert_eq!(pages, 1);
                assert!(offset as usize <= truncated.len());
                assert!(offset as usize > full.find("</page>").unwrap());
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn page_without_title_is_skipped() {
        let xml = format!(
            "{HEADER}{}{}</mediawiki>",
            page("", 0, None, "orphan"),
            page("Kept", 0, None, "text")
        );
        let pages = collect(&xml).unwrap();
        assert_eq!(pages.len(), 1);
        assert_eq!(pages[0].title, "Kept");
    }

    #[test]
    fn malformed_xml_is_an_error() {
        let xml = format!("{HEADER}<page><title>A</wrong></page></mediawiki>");
        assert!(matches!(collect(&xml), Err(Error::Dump { .. })));
    }

    #[test]
    fn non_content_namespace_is_kept_but_flagged() {
        let xml = format!("{HEADER}{}</mediawiki>", page("Talk:X", 1, None, "t"));
        let pages = collect(&xml).unwrap();
        assert_eq!(pages[0].namespace, 1);
        assert!(!pages[0].is_content());
    }
}
