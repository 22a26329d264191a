//! Deterministic synthetic data: a miniature two-language wiki dump, a dump
//! of long articles for window-position statistics, and a toy NER set whose
//! entity names come from the miniature dump.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::taskconv::TaggingInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityType {
    Per,
    Loc,
    Org,
    Misc,
}

impl EntityType {
    pub fn label(self) -> &'static str {
        match self {
            EntityType::Per => "PER",
            EntityType::Loc => "LOC",
            EntityType::Org => "ORG",
            EntityType::Misc => "MISC",
        }
    }
}

use EntityType::{Loc, Misc, Org, Per};

/// Entities with an article in every miniature language.
pub const ENTITIES: [(&str, EntityType); 24] = [
    ("Alvar Kessin", Per),
    ("Varnholm", Loc),
    ("Halden Works", Org),
    ("Ostrin Cup", Misc),
    ("Mira Tolvane", Per),
    ("Lake Ostrin", Loc),
    ("Tamsor United", Org),
    ("Oskar Brandl", Per),
    ("Keldara", Loc),
    ("Kestrel Institute", Org),
    ("Kelda Prize", Misc),
    ("Ilse Marrow", Per),
    ("Brisk Valley", Loc),
    ("Northline Rail", Org),
    ("Teodor Vask", Per),
    ("Tamsor", Loc),
    ("Varn Bank", Org),
    ("Rovena Festival", Misc),
    ("Lena Quist", Per),
    ("Nordvik Bay", Loc),
    ("Ruben Halde", Per),
    ("Ellmark", Loc),
    ("Sanna Eklow", Per),
    ("Rovena", Loc),
];

/// Has an article but is linked only a handful of times.
pub const RARE_ENTITY: &str = "Sefer Pass";
const RARE_LINKS: usize = 6;
/// Linked but has no article.
pub const MISSING_ENTITY: &str = "Mount Idrel";

/// One-hop redirects, plus a two-hop chain whose first hop lands on a
/// redirect.
const REDIRECTS: [(&str, &str); 5] = [
    ("Kessin", "Alvar Kessin"),
    ("Ostrin Lake", "Lake Ostrin"),
    ("Kestrel", "Kestrel Institute"),
    ("Varnholm City", "Old Varnholm"),
    ("Old Varnholm", "Varnholm"),
];

pub const MINI_LANGUAGES: [&str; 2] = ["en", "de"];

const ANCHORS_PER_ARTICLE: usize = 14;

struct Phrases {
    definition: [&'static str; 4],
    second: &'static str,
    history: &'static str,
    body: [&'static str; 7],
    rare: &'static str,
    missing: &'static str,
    links: &'static str,
    site: &'static str,
}

const EN: Phrases = Phrases {
    definition: [
        "'''{t}''' (born {year}) is a person from {loc}, known as a painter and writer.",
        "'''{t}''' is a location in the north, a small city near {loc}.",
        "'''{t}''' is an organization, a corporate company based in {loc}.",
        "'''{t}''' is an event, a yearly festival and competition held in {loc}.",
    ],
    second: "Little is written about its early years.",
    history: "History",
    body: [
        "In {year}, {a} met {b} at the harbour.",
        "Records show that {a} worked closely with {b} for many years.",
        "The old road from {a} leads past {b} and the river.",
        "Critics often compared {a} with {b}.",
        "Later reports mention {a} together with {b} in the same archive.",
        "A short film about {a} was shown near {b}.",
        "Visitors to {a} usually travel on to {b}.",
    ],
    rare: "A narrow path leads up to {a}.",
    missing: "On clear days {a} can be seen from here.",
    links: "External links",
    site: "Official site",
};

const DE: Phrases = Phrases {
    definition: [
        "'''{t}''' (geboren {year}) ist eine Person aus {loc}, bekannt als Maler und Autor.",
        "'''{t}''' ist ein Ort im Norden, eine kleine Stadt bei {loc}.",
        "'''{t}''' ist eine Organisation, ein Unternehmen mit Sitz in {loc}.",
        "'''{t}''' ist ein Ereignis, ein jährliches Fest und Wettbewerb in {loc}.",
    ],
    second: "Über die frühen Jahre ist wenig bekannt.",
    history: "Geschichte",
    body: [
        "Im Jahr {year} traf {a} auf {b} am Hafen.",
        "Berichte zeigen, dass {a} viele Jahre mit {b} arbeitete.",
        "Die alte Straße von {a} führt an {b} und dem Fluss vorbei.",
        "Kritiker verglichen {a} oft mit {b}.",
        "Spätere Berichte nennen {a} zusammen mit {b} im selben Archiv.",
        "Ein kurzer Film über {a} wurde bei {b} gezeigt.",
        "Besucher von {a} reisen meist weiter nach {b}.",
    ],
    rare: "Ein schmaler Weg führt hinauf zum {a}.",
    missing: "An klaren Tagen sieht man von hier {a}.",
    links: "Weblinks",
    site: "Offizielle Seite",
};

fn phrases(lang: &str) -> &'static Phrases {
    if lang == "de" {
        &DE
    } else {
        &EN
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Writes MediaWiki export XML.
pub struct DumpWriter {
    out: String,
    next_id: usize,
}

impl DumpWriter {
    pub fn new(lang: &str) -> Self {
        let mut out = String::new();
        out.push_str(&format!(
            "<mediawiki xmlns=\"http://www.mediawiki.org/xml/export-0.10/\" version=\"0.10\" xml:lang=\"{lang}\">\n"
        ));
        out.push_str("  <siteinfo>\n    <sitename>Synthwiki</sitename>\n  </siteinfo>\n");
        Self { out, next_id: 1 }
    }

    pub fn page(&mut self, title: &str, ns: i64, redirect: Option<&str>, text: &str) {
        let id = self.next_id;
        self.next_id += 1;
        self.out.push_str("  <page>\n");
        self.out.push_str(&format!("    <title>{}</title>\n    <ns>{ns}</ns>\n    <id>{id}</id>\n", xml_escape(title)));
        if let Some(target) = redirect {
            self.out.push_str(&format!("    <redirect title=\"{}\" />\n", xml_escape(target)));
        }
        self.out.push_str(&format!(
            "    <revision>\n      <id>{}</id>\n      <text xml:space=\"preserve\">{}</text>\n    </revision>\n",
            1000 + id,
            xml_escape(text)
        ));
        self.out.push_str("  </page>\n");
    }

    pub fn finish(mut self) -> String {
        self.out.push_str("</mediawiki>\n");
        self.out
    }
}

fn redirect_alias(title: &str) -> Option<&'static str> {
    REDIRECTS.iter().find(|(_, to)| *to == title).map(|(from, _)| *from)
}

/// Link markup for the `m`-th anchor of an article: plain, piped to the last
/// word, or through a redirect.
fn link(title: &str, m: usize) -> String {
    if m % 7 == 4 {
        if let Some(alias) = redirect_alias(title) {
            return format!("[[{alias}]]");
        }
    }
    if m % 5 == 3 {
        if let Some((_, last)) = title.rsplit_once(' ') {
            return format!("[[{title}|{last}]]");
        }
    }
    format!("[[{title}]]")
}

fn year(i: usize) -> usize {
    1900 + (i * 37) % 100
}

fn type_slot(t: EntityType) -> usize {
    match t {
        Per => 0,
        Loc => 1,
        Org => 2,
        Misc => 3,
    }
}

fn locations() -> Vec<&'static str> {
    ENTITIES.iter().filter(|e| e.1 == Loc).map(|e| e.0).collect()
}

fn article_text(lang: &str, i: usize, title: &str, kind: EntityType, targets: &[&str], extra: &[String]) -> String {
    let p = phrases(lang);
    let locs = locations();
    let mut loc = locs[(i + 1) % locs.len()];
    if loc == title {
        loc = locs[(i + 2) % locs.len()];
    }
    let mut text = String::new();
    text.push_str(&format!(
        "{{{{Infobox {} | name = {title} | year = {} }}}}\n",
        kind.label().to_lowercase(),
        year(i)
    ));
    let def = p.definition[type_slot(kind)]
        .replace("{t}", title)
        .replace("{year}", &year(i).to_string())
        .replace("{loc}", &format!("[[{loc}]]"));
    text.push_str(&def);
    text.push_str(&format!(" {}<ref>{{{{cite web | title = {title} archive }}}}</ref> <!-- stub -->\n\n", p.second));
    text.push_str(&format!("== {} ==\n", p.history));
    for (s, pair) in targets.chunks(2).enumerate() {
        let tpl = p.body[(i + s) % p.body.len()];
        let a = link(pair[0], 2 * s);
        let b = pair.get(1).map(|t| link(t, 2 * s + 1)).unwrap_or_default();
        text.push_str(&tpl.replace("{year}", &year(i + s).to_string()).replace("{a}", &a).replace("{b}", &b));
        text.push(if s % 3 == 2 { '\n' } else { ' ' });
    }
    text.push('\n');
    for e in extra {
        text.push_str(e);
        text.push('\n');
    }
    text.push_str(&format!(
        "\n== {} ==\n* [http://example.org/{} {}]\n\n[[Category:{}]]\n[[{}:{title}]]\n",
        p.links,
        title.replace(' ', "_"),
        p.site,
        kind.label(),
        if lang == "en" { "de" } else { "en" }
    ));
    text
}

/// The miniature dump for one language (`"en"` or `"de"`): 25 articles,
/// redirects, and two pages outside the main namespace.
pub fn mini_dump(lang: &str) -> String {
    let p = phrases(lang);
    let mut w = DumpWriter::new(lang);
    let n = ENTITIES.len();
    for (i, &(title, kind)) in ENTITIES.iter().enumerate() {
        let targets: Vec<&str> = (0..ANCHORS_PER_ARTICLE).map(|m| ENTITIES[(i + 1 + m) % n].0).collect();
        let mut extra = Vec::new();
        if i < RARE_LINKS {
            extra.push(p.rare.replace("{a}", &format!("[[{RARE_ENTITY}]]")));
        }
        if i % 8 == 5 {
            extra.push(p.missing.replace("{a}", &format!("[[{MISSING_ENTITY}]]")));
        }
        w.page(title, 0, None, &article_text(lang, i, title, kind, &targets, &extra));
    }
    let rare_targets = [ENTITIES[0].0, ENTITIES[1].0];
    w.page(RARE_ENTITY, 0, None, &article_text(lang, n, RARE_ENTITY, Loc, &rare_targets, &[]));
    for (from, to) in REDIRECTS {
        w.page(from, 0, Some(to), &format!("#REDIRECT [[{to}]]"));
    }
    w.page("Talk:Varnholm", 1, None, "Is [[Varnholm]] really a city?");
    w.page("Template:Infobox loc", 10, None, "{{{name}}}");
    w.finish()
}

/// The bundled copy of [`mini_dump`].
pub fn bundled_mini_dump(lang: &str) -> Option<&'static str> {
    match lang {
        "en" => Some(include_str!("../data/minidump/en.xml")),
        "de" => Some(include_str!("../data/minidump/de.xml")),
        _ => None,
    }
}

const FILLER: [&str; 12] = [
    "stone", "river", "market", "winter", "lantern", "field", "harbour", "garden", "bridge", "tower", "meadow", "road",
];

pub fn long_entity_title(k: usize) -> String {
    format!("Zentor{k:04}")
}

/// Short definition articles for `entities` single-token entities and long
/// mention articles in which every entity is linked exactly
/// `mentions_per_entity` times, each link at least `margin` tokens away from
/// both article ends.
pub fn long_dump(entities: usize, mentions_per_entity: usize, margin: usize) -> String {
    let mut w = DumpWriter::new("en");
    for k in 0..entities {
        let t = long_entity_title(k);
        w.page(&t, 0, None, &format!("'''{t}''' is a person and a painter from the valley number {k}."));
    }
    let per_article = 100.min(entities);
    let total = entities * mentions_per_entity;
    let articles = total.div_ceil(per_article);
    let filler = |n: usize, off: usize| -> String {
        (0..n).map(|i| FILLER[(i + off) % FILLER.len()]).collect::<Vec<_>>().join(" ")
    };
    let stride = entities / mentions_per_entity.max(1);
    for a in 0..articles {
        let mut body = filler(margin, a);
        for j in 0..per_article {
            let k = (a * stride + j) % entities;
            body.push_str(&format!(" [[{}]]", long_entity_title(k)));
            if j + 1 < per_article {
                body.push_str(" and");
            }
        }
        body.push(' ');
        body.push_str(&filler(margin + 1, a + 5));
        w.page(&format!("Chronicle {a}"), 0, None, &body);
    }
    w.finish()
}

const NER_TEMPLATES: [&str; 10] = [
    "{PER} moved to {LOC} in {year} .",
    "{ORG} hired {PER} after the {MISC} .",
    "Fans of {ORG} travelled from {LOC} to see the {MISC} .",
    "{PER} and {PER} opened a shop in {LOC} .",
    "The {MISC} was sponsored by {ORG} .",
    "In {year} , {PER} left {ORG} .",
    "{LOC} is close to {LOC} .",
    "Nobody came to the meeting on {day} .",
    "Reporters asked {PER} about the {MISC} in {LOC} .",
    "Shares of {ORG} rose on {day} .",
];

const DAYS: [&str; 5] = ["Monday", "Tuesday", "Friday", "Saturday", "Sunday"];

/// `n` pre-tokenized English sentences with PER/LOC/ORG/MISC spans drawn from
/// the miniature entity inventory.
pub fn toy_ner(n: usize, seed: u64) -> Vec<TaggingInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = |t: EntityType| -> Vec<&'static str> { ENTITIES.iter().filter(|e| e.1 == t).map(|e| e.0).collect() };
    let pools = [(Per, pool(Per)), (Loc, pool(Loc)), (Org, pool(Org)), (Misc, pool(Misc))];
    (0..n)
        .map(|i| {
            let template = NER_TEMPLATES[rng.random_range(0..NER_TEMPLATES.len())];
            let mut tokens: Vec<String> = Vec::new();
            let mut spans = Vec::new();
            for slot in template.split_whitespace() {
                if let Some((kind, names)) = pools.iter().find(|(k, _)| slot == format!("{{{}}}", k.label())) {
                    let name = names.choose(&mut rng).expect("non-empty pool");
                    let start = tokens.len();
                    tokens.extend(name.split_whitespace().map(String::from));
                    spans.push((kind.label().to_string(), start, tokens.len() - 1));
                } else if slot == "{year}" {
                    tokens.push(rng.random_range(1950..2020).to_string());
                } else if slot == "{day}" {
                    tokens.push(DAYS.choose(&mut rng).expect("non-empty").to_string());
                } else {
                    tokens.push(slot.to_string());
                }
            }
            TaggingInstance {
                id: format!("toy-{seed}-{i}"),
                lang: "en".into(),
                tokens,
                spans,
            }
        })
        .collect()
}
