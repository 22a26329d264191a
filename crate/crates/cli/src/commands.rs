use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::de::DeserializeOwned;
use serde::Serialize;

use wikimrc::eval::{build_report, score_instance, InstanceResult};
use wikimrc::jsonl::read_jsonl;
use wikimrc::mrcgen::{corpus_stats, ArticleStore, Generator, MrcExample};
use wikimrc::pipeline::{ingest_dump, predict_tasks};
use wikimrc::reader::{
    extract_rationale, load_checkpoint, save_checkpoint, train, write_loss_trace, Mode, Reader, ReaderConfig,
};
use wikimrc::synth::{bundled_mini_dump, MINI_LANGUAGES};
use wikimrc::taskconv::{
    convert_task, EqaInstance, PairInstance, PairMode, Scheme, TaggingInstance, TaskInstance, TaskKind, TaskPrediction,
    UnifiedInput,
};
use wikimrc::wikicorpus::index::RedirectRecord;
use wikimrc::wikicorpus::{
    filter_entities, index::build_entity_index_parallel, Article, CorpusBuilder, EntityEntry, EntityIndex, MinCounts,
    Redirects, TokenizerRegistry,
};

use crate::config::{PipelineConfig, TaskSettings};
use crate::{
    BuildCorpus, Cli, Command, ConvertTask, Evaluate, Finetune, GenPretrain, IndexCmd, RationaleCmd, Stats, TrainArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<wikimrc::Error> for CliError {
    fn from(e: wikimrc::Error) -> Self {
        match e {
            wikimrc::Error::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(m: impl Into<String>) -> CliError {
    CliError::Usage(m.into())
}

fn at(path: &Path) -> impl Fn(wikimrc::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(open(path)?).collect::<wikimrc::Result<Vec<T>>>().map_err(at(path))
}

fn write_records<'a, T: Serialize + 'a>(path: &Path, records: impl IntoIterator<Item = &'a T>) -> Result<usize> {
    let mut out = create(path)?;
    let mut n = 0;
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| CliError::Data(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| CliError::Data(e.to_string()))?;
        n += 1;
    }
    out.flush().map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(n)
}

fn key_value(s: &str, what: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(usage(format!("{what} must look like KEY=VALUE, got {s:?}"))),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let config = PipelineConfig::load(cli.config.as_deref()).map_err(usage)?;
    match cli.command {
        Command::BuildCorpus(a) => build_corpus(a, &config),
        Command::Index(a) => index(a),
        Command::GenPretrain(a) => gen_pretrain(a, &config),
        Command::ConvertTask(a) => convert(a),
        Command::Pretrain(a) => pretrain(a, &config),
        Command::Finetune(a) => finetune(a, &config),
        Command::Evaluate(a) => evaluate(a, &config),
        Command::Rationale(a) => rationale(a),
        Command::Stats(a) => stats(a),
    }
}

fn build_corpus(a: BuildCorpus, config: &PipelineConfig) -> Result<()> {
    let keep = |lang: &str| config.languages.is_empty() || config.languages.contains(lang);
    let mut builder = CorpusBuilder::default();
    let mut pages = 0;
    if a.synthetic {
        for lang in MINI_LANGUAGES.into_iter().filter(|l| keep(l)) {
            let text = bundled_mini_dump(lang).expect("bundled language");
            pages += ingest_dump(&mut builder, text.as_bytes(), lang)?;
        }
    }
    for spec in &a.dumps {
        let (lang, path) = key_value(spec, "--dump")?;
        if !keep(&lang) {
            info!("skipping {path}: language {lang} not configured");
            continue;
        }
        let path = PathBuf::from(path);
        pages += ingest_dump(&mut builder, open(&path)?, &lang).map_err(at(&path))?;
    }
    let articles = write_records(&a.out.join("articles.jsonl"), &builder.articles)?;
    let redirects = write_records(&a.out.join("redirects.jsonl"), &builder.redirects.records())?;
    info!(
        "{pages} pages: {articles} articles, {redirects} redirects, {} skipped",
        builder.skipped_pages
    );
    Ok(())
}

fn load_corpus(dir: &Path) -> Result<(Vec<Article>, Redirects)> {
    let articles: Vec<Article> = read_records(&dir.join("articles.jsonl"))?;
    let redirects_path = dir.join("redirects.jsonl");
    let redirects = if redirects_path.exists() {
        Redirects::from_records(read_records::<RedirectRecord>(&redirects_path)?)
    } else {
        Redirects::default()
    };
    Ok((articles, redirects))
}

fn index(a: IndexCmd) -> Result<()> {
    let mut counts = MinCounts {
        default: a.min_count_default,
        ..MinCounts::default()
    };
    for spec in &a.min_count {
        let (lang, n) = key_value(spec, "--min-count")?;
        let n: usize = n.parse().map_err(|_| usage(format!("--min-count {spec}: not a count")))?;
        counts.per_language.insert(lang, n);
    }
    let (articles, redirects) = load_corpus(&a.corpus)?;
    let full = build_entity_index_parallel(&articles, &redirects);
    let kept = filter_entities(&full, &counts);
    let out = a.out.unwrap_or_else(|| a.corpus.join("index.jsonl"));
    write_records(&out, kept.iter())?;
    info!("{} of {} entities kept", kept.len(), full.len());
    Ok(())
}

fn parse_caps(s: &str) -> Result<(usize, usize)> {
    let bad = || usage(format!("--caps {s:?}: expected N or A,U"));
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [n] => Ok((n, n)),
        [a, u] => Ok((a, u)),
        _ => Err(bad()),
    }
}

fn gen_pretrain(a: GenPretrain, config: &PipelineConfig) -> Result<()> {
    let mut gen = config.gen.clone();
    if !config.languages.is_empty() {
        gen.languages = config.languages.clone();
    }
    if let Some(q) = a.query_words {
        gen.query_words = q;
    }
    if let Some(c) = a.context_words {
        gen.context_words = c;
    }
    if let Some(s) = a.seed {
        gen.seed = s;
    }
    if let Some(caps) = &a.caps {
        (gen.answerable_cap, gen.unanswerable_cap) = parse_caps(caps)?;
    }
    if !a.languages.is_empty() {
        gen.languages = a.languages.iter().cloned().collect();
    }
    gen.validate().map_err(|e| usage(e.to_string()))?;

    let (articles, _) = load_corpus(&a.corpus)?;
    let index_path = a.index.unwrap_or_else(|| a.corpus.join("index.jsonl"));
    let entries: Vec<EntityEntry> = read_records(&index_path)?;
    let index = EntityIndex::from_entries(entries, &articles);
    let store = ArticleStore::new(articles);
    let tokenizers = TokenizerRegistry::default();
    let generator = Generator {
        index: &index,
        store: &store,
        config: &gen,
        tokenizers: &tokenizers,
    };
    let n = if a.sorted {
        let out = generator.run(a.workers);
        write_records(&a.out, &out.examples)?
    } else {
        let mut out = create(&a.out)?;
        let mut n = 0;
        for ex in generator.stream() {
            serde_json::to_writer(&mut out, &ex).map_err(|e| CliError::Data(e.to_string()))?;
            out.write_all(b"\n").map_err(|e| CliError::Data(e.to_string()))?;
            n += 1;
        }
        out.flush().map_err(|e| CliError::Data(e.to_string()))?;
        n
    };
    info!("{n} examples for {} entities", index.len());
    Ok(())
}

fn parse_task(s: &str) -> Result<TaskKind> {
    s.parse().map_err(|e: wikimrc::Error| usage(e.to_string()))
}

fn load_scheme(name: Option<&str>, task: TaskKind) -> Result<Scheme> {
    let name = name.unwrap_or(match task {
        TaskKind::Eqa => "eqa",
        TaskKind::Ner => "conll",
        TaskKind::Absa => "absa",
        TaskKind::Pair => "pawsx",
    });
    let scheme = match name {
        "conll" => Scheme::conll(),
        "absa" => Scheme::absa(),
        "pawsx" => Scheme::pawsx(),
        "xnli" => Scheme::xnli(),
        "eqa" => Scheme::eqa(),
        path => {
            let path = Path::new(path);
            Scheme::load(path).map_err(at(path))?
        }
    };
    if scheme.task != task {
        return Err(usage(format!("scheme {name} is for {:?}, not {task:?}", scheme.task)));
    }
    Ok(scheme)
}

/// Reads native instances; lines carrying a `task` field are taken as is.
fn read_instances(path: &Path, task: TaskKind) -> Result<Vec<TaskInstance>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        let parsed = if value.get("task").is_some() {
            serde_json::from_value(value)
        } else {
            match task {
                TaskKind::Eqa => serde_json::from_value::<EqaInstance>(value).map(TaskInstance::Eqa),
                TaskKind::Ner | TaskKind::Absa => {
                    serde_json::from_value::<TaggingInstance>(value).map(TaskInstance::Tagging)
                }
                TaskKind::Pair => serde_json::from_value::<PairInstance>(value).map(TaskInstance::Pair),
            }
        };
        out.push(parsed.map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}

fn convert(a: ConvertTask) -> Result<()> {
    let task = parse_task(&a.task)?;
    let scheme = load_scheme(a.scheme.as_deref(), task)?;
    let mode: PairMode = a.mode.parse().map_err(|e: wikimrc::Error| usage(e.to_string()))?;
    let tokenizers = TokenizerRegistry::default();
    let mut records = Vec::new();
    for inst in read_instances(&a.input, task)? {
        let inputs = convert_task(&inst, &scheme, mode, &tokenizers).map_err(at(&a.input))?;
        for (k, u) in inputs.iter().enumerate() {
            records.push(u.to_record(format!("{}#{k}", inst.id())));
        }
    }
    let n = write_records(&a.out, &records)?;
    info!("{n} inputs written");
    Ok(())
}

fn read_inputs(path: &Path) -> Result<Vec<UnifiedInput>> {
    read_records::<MrcExample>(path)?
        .iter()
        .map(|r| UnifiedInput::from_record(r).map_err(at(path)))
        .collect()
}

fn apply_train_flags(config: &mut ReaderConfig, a: &TrainArgs) {
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut config.steps, a.steps);
    set(&mut config.batch_size, a.batch_size);
    set(&mut config.hidden, a.hidden);
    set(&mut config.layers, a.layers);
    set(&mut config.heads, a.heads);
    set(&mut config.max_len, a.max_len);
    if let Some(lr) = a.learning_rate {
        config.learning_rate = lr;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
}

fn finish_training(reader: &Reader, trace: &[f64], a: &TrainArgs) -> Result<()> {
    save_checkpoint(reader, &a.out).map_err(at(&a.out))?;
    if let Some(path) = &a.loss_csv {
        let mut out = create(path)?;
        write_loss_trace(&mut out, trace).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    if let Some(last) = trace.last() {
        info!("{} steps, final batch loss {last:.6}", trace.len());
    }
    Ok(())
}

fn pretrain(a: TrainArgs, config: &PipelineConfig) -> Result<()> {
    let mut rc = config.reader.clone();
    apply_train_flags(&mut rc, &a);
    rc.validate().map_err(|e| usage(e.to_string()))?;
    let data = read_inputs(&a.data)?;
    let (reader, trace) = train(&data, &rc, Mode::Pretrain, None)?;
    finish_training(&reader, &trace, &a)
}

fn preset<'a>(config: &'a PipelineConfig, name: Option<&str>) -> Result<Option<&'a TaskSettings>> {
    name.map(|n| {
        config
            .tasks
            .get(n)
            .ok_or_else(|| usage(format!("unknown preset {n:?}; known: {:?}", config.tasks.keys().collect::<Vec<_>>())))
    })
    .transpose()
}

fn finetune(a: Finetune, config: &PipelineConfig) -> Result<()> {
    let settings = preset(config, a.preset.as_deref())?;
    let mut rc = config.reader.clone();
    let mut epochs = a.epochs;
    if let Some(s) = settings {
        rc.max_len = s.input_length;
        rc.batch_size = s.batch_size;
        rc.learning_rate = s.learning_rate;
        epochs = epochs.or(Some(s.epochs));
    }
    apply_train_flags(&mut rc, &a.train);
    let mut data = read_inputs(&a.train.data)?;
    if let Some(s) = settings {
        for u in &mut data {
            u.truncate_query(s.query_length);
        }
    }
    if let (None, Some(e)) = (a.train.steps, epochs) {
        rc.steps = e * data.len().div_ceil(rc.batch_size.max(1));
    }
    rc.validate().map_err(|e| usage(e.to_string()))?;
    let init = load_checkpoint(&a.init).map_err(at(&a.init))?;
    let (reader, trace) = train(&data, &rc, Mode::Finetune, Some(init))?;
    finish_training(&reader, &trace, &a.train)
}

fn evaluate(a: Evaluate, config: &PipelineConfig) -> Result<()> {
    let task = parse_task(&a.task)?;
    let mut gold_sets = Vec::new();
    for spec in &a.gold {
        let (name, path) = key_value(spec, "--gold")?;
        let path = PathBuf::from(path);
        gold_sets.push((name, read_instances(&path, task)?));
    }
    let mut predictions: HashMap<String, HashMap<String, TaskPrediction>> = HashMap::new();
    if let Some(ckpt) = &a.checkpoint {
        let reader = load_checkpoint(ckpt).map_err(at(ckpt))?;
        let scheme = load_scheme(a.scheme.as_deref(), task)?;
        let query_limit = preset(config, a.preset.as_deref())?.map(|s| s.query_length);
        let tokenizers = TokenizerRegistry::default();
        for (name, gold) in &gold_sets {
            let preds = predict_tasks(&reader, gold, &scheme, &tokenizers, query_limit)?;
            if let Some(dir) = &a.write_predictions {
                write_records(&dir.join(format!("{name}.jsonl")), &preds)?;
            }
            predictions.insert(name.clone(), preds.into_iter().map(|p| (p.id().to_string(), p)).collect());
        }
    } else {
        for spec in &a.predictions {
            let (name, path) = key_value(spec, "--predictions")?;
            let preds: Vec<TaskPrediction> = read_records(Path::new(&path))?;
            predictions
                .entry(name)
                .or_default()
                .extend(preds.into_iter().map(|p| (p.id().to_string(), p)));
        }
    }
    let mut results = Vec::new();
    for (name, gold) in &gold_sets {
        let preds = predictions
            .get(name)
            .ok_or_else(|| usage(format!("no predictions given for dataset {name}")))?;
        for g in gold {
            let p = preds
                .get(g.id())
                .ok_or_else(|| CliError::Data(format!("{name}: no prediction for {}", g.id())))?;
            results.push(InstanceResult {
                dataset: name.clone(),
                lang: g.lang().to_string(),
                score: score_instance(p, g)?,
            });
        }
    }
    let report = build_report(&results)?;
    print!("{}", report.render());
    if let Some(path) = &a.rows {
        write_records(path, &report.rows())?;
    }
    Ok(())
}

fn rationale(a: RationaleCmd) -> Result<()> {
    let scheme = load_scheme(Some(a.scheme.as_deref().unwrap_or("xnli")), TaskKind::Pair)?;
    let reader = load_checkpoint(&a.checkpoint).map_err(at(&a.checkpoint))?;
    let r = extract_rationale(&reader, &a.sen1, &a.sen2, &a.label, &scheme, &TokenizerRegistry::default())?;
    println!("{}", serde_json::to_string(&r).map_err(|e| CliError::Data(e.to_string()))?);
    Ok(())
}

fn stats(a: Stats) -> Result<()> {
    let examples: Vec<MrcExample> = read_records(&a.data)?;
    let s = corpus_stats(&examples);
    if a.json {
        for row in s.machine_rows() {
            println!("{}", serde_json::to_string(&row).map_err(|e| CliError::Data(e.to_string()))?);
        }
    } else {
        print!("{}", s.render());
    }
    Ok(())
}
