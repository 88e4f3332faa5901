use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use udrefine_core::adjudication::{extract_divergences, make_blind_items, sample_items, AdjudicationError};
use udrefine_core::campaign::{Annotator, Campaign, CampaignConfig, CampaignError};
use udrefine_core::evaluation::{evaluate_parse, render_retrieval_table, retrieval_report, FUNCTIONAL_RELATIONS};
use udrefine_core::refine::{
    refine_treebank, HttpBackend, HttpBackendConfig, LlmBackend, MockBackend, RefineConfig, RefineError,
};
use udrefine_core::retrieval::KnowledgeBaseCache;
use udrefine_core::{parse_conllu, serialize, Genre, KnowledgeBase, Strategy, Treebank};

use crate::args::{
    AdjudicateArgs, EvalParseArgs, EvalRetrievalArgs, KbArgs, PairArgs, RefineArgs, ReportArgs, RetrieveArgs,
    ServeArgs,
};
use crate::manifest::RunManifest;
use crate::{usage_error, Classify, CmdResult, Failure};

fn read(path: &Path, manifest: &mut RunManifest) -> CmdResult<String> {
    let text = fs::read_to_string(path).usage(format!("reading {}", path.display()))?;
    manifest.input(path, text.as_bytes());
    Ok(text)
}

fn write(path: &Path, text: &str, manifest: &mut RunManifest) -> CmdResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).usage(format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).usage(format!("writing {}", path.display()))?;
    manifest.output(path);
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize, manifest: &mut RunManifest) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write(path, &text, manifest)
}

fn load_treebank(path: &Path, genre: Option<Genre>, manifest: &mut RunManifest) -> CmdResult<Treebank> {
    let text = read(path, manifest)?;
    let label = path.display().to_string();
    parse_conllu(&text, &label, genre).invalid(format!("parsing {label}"))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn finish(manifest: RunManifest, explicit: Option<&Path>, out: Option<&Path>) -> CmdResult {
    let target = explicit.map(Path::to_path_buf).or_else(|| out.map(sidecar));
    if let Some(path) = target {
        manifest.write(&path).usage(format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn load_kb(args: &KbArgs, manifest: &mut RunManifest) -> CmdResult<KnowledgeBase> {
    let treebank = load_treebank(&args.kb, None, manifest)?;
    if let Some(cache_path) = &args.kb_cache {
        if cache_path.exists() {
            let text = fs::read_to_string(cache_path).usage(format!("reading {}", cache_path.display()))?;
            let loaded = serde_json::from_str::<KnowledgeBaseCache>(&text)
                .map_err(|e| e.to_string())
                .and_then(|cache| KnowledgeBase::from_cache(&treebank, cache).map_err(|e| e.to_string()));
            match loaded {
                Ok(kb) => {
                    manifest.input(cache_path, text.as_bytes());
                    return Ok(kb);
                }
                Err(why) => tracing::warn!(cache = %cache_path.display(), %why, "rebuilding stale KB cache"),
            }
        }
    }
    let kb = KnowledgeBase::build(&treebank).invalid(format!("indexing {}", args.kb.display()))?;
    if let Some(cache_path) = &args.kb_cache {
        let text = serde_json::to_string(&kb.to_cache()).expect("cache serializes");
        write(cache_path, &text, manifest)?;
    }
    Ok(kb)
}

#[derive(Serialize)]
struct HitRow<'a> {
    rank: usize,
    index: usize,
    sent_id: &'a str,
    score: f64,
}

#[derive(Serialize)]
struct QueryHits<'a> {
    sent_id: &'a str,
    hits: Vec<HitRow<'a>>,
}

#[derive(Serialize)]
struct RetrieveOutput<'a> {
    strategy: Strategy,
    k: usize,
    queries: Vec<QueryHits<'a>>,
}

pub fn retrieve(args: RetrieveArgs) -> CmdResult {
    let mut manifest = RunManifest::start("retrieve", &args);
    if args.k == 0 {
        return Err(usage_error("--k must be at least 1"));
    }
    let kb = load_kb(&args.kb, &mut manifest)?;
    let queries = load_treebank(&args.queries, None, &mut manifest)?;
    let mut rows = Vec::with_capacity(queries.len());
    for q in &queries.sentences {
        let exclude = if args.exclude_self { kb.position_of(&q.sent_id) } else { None };
        let result = kb
            .retrieve(q, args.strategy, args.k, exclude)
            .invalid(format!("retrieving for {}", q.sent_id))?;
        let hits: Vec<HitRow> = result
            .hits
            .iter()
            .enumerate()
            .map(|(rank, h)| HitRow {
                rank: rank + 1,
                index: h.index,
                sent_id: kb.sentence(h.index).map_or("", |s| s.sent_id.as_str()),
                score: h.score,
            })
            .collect();
        let top: Vec<String> = hits.iter().map(|h| format!("{} ({:.4})", h.sent_id, h.score)).collect();
        println!("{}\t{}", q.sent_id, top.join(", "));
        rows.push(QueryHits {
            sent_id: &q.sent_id,
            hits,
        });
    }
    let output = RetrieveOutput {
        strategy: args.strategy,
        k: args.k,
        queries: rows,
    };
    write_json(&args.out, &output, &mut manifest)?;
    finish(manifest, None, Some(&args.out))
}

pub fn eval_retrieval(args: EvalRetrievalArgs) -> CmdResult {
    let mut manifest = RunManifest::start("eval-retrieval", &args);
    if args.k == 0 {
        return Err(usage_error("--k must be at least 1"));
    }
    let kb = load_kb(&args.kb, &mut manifest)?;
    let mut datasets = Vec::new();
    for (name, path) in &args.datasets {
        datasets.push((name.clone(), load_treebank(path, None, &mut manifest)?));
    }
    let mut reports = Vec::new();
    let mut run = |name: &str, queries: &Treebank| -> CmdResult {
        for strategy in Strategy::ALL {
            reports.push(
                retrieval_report(name, &kb, &queries.sentences, strategy, args.k, args.exclude_self)
                    .invalid(format!("evaluating {name}"))?,
            );
        }
        Ok(())
    };
    for (name, queries) in &datasets {
        run(name, queries)?;
    }
    if datasets.len() > 1 {
        let mut pooled = Treebank::new("combined");
        for (_, q) in &datasets {
            pooled.sentences.extend(q.sentences.iter().cloned());
        }
        run("Combined", &pooled)?;
    }
    print!("{}", render_retrieval_table(&reports));
    if let Some(out) = &args.out {
        write_json(out, &reports, &mut manifest)?;
    }
    finish(manifest, args.manifest.as_deref(), args.out.as_deref())
}

fn load_pairs(pair: &PairArgs, manifest: &mut RunManifest) -> CmdResult<(Treebank, Treebank)> {
    if pair.gold.len() != pair.system.len() {
        return Err(usage_error(format!(
            "{} --gold files but {} --system files",
            pair.gold.len(),
            pair.system.len()
        )));
    }
    if !pair.genre.is_empty() && pair.genre.len() != pair.gold.len() {
        return Err(usage_error("give one --genre per --gold file, or none"));
    }
    let mut gold = Treebank::new("gold");
    let mut system = Treebank::new("system");
    for (i, (g, s)) in pair.gold.iter().zip(&pair.system).enumerate() {
        let genre = pair.genre.get(i).map(|&g| Genre::from(g));
        gold.sentences.extend(load_treebank(g, genre, manifest)?.sentences);
        system.sentences.extend(load_treebank(s, genre, manifest)?.sentences);
    }
    let mut seen = HashSet::new();
    if let Some(dup) = gold.sentences.iter().find(|s| !seen.insert(s.sent_id.as_str())) {
        return Err(Failure::Invalid(anyhow::anyhow!(
            "sent_id {:?} occurs in more than one gold file",
            dup.sent_id
        )));
    }
    Ok((gold, system))
}

fn backend(args: &RefineArgs) -> CmdResult<Box<dyn LlmBackend>> {
    if let Some(spec) = args.backend.strip_prefix("mock:") {
        if spec.is_empty() {
            return Err(usage_error("--backend mock: needs echo, garbage or a script path"));
        }
        return Ok(Box::new(MockBackend::from_spec(spec).usage("configuring mock backend")?));
    }
    if args.backend != "http" {
        return Err(usage_error(format!(
            "unknown backend {:?} (expected mock:echo, mock:garbage, mock:<script> or http)",
            args.backend
        )));
    }
    let (Some(endpoint), Some(model)) = (&args.endpoint, &args.model) else {
        return Err(usage_error("--backend http requires --endpoint and --model"));
    };
    let mut config = HttpBackendConfig::new(endpoint.clone(), model.clone());
    config.api_key = std::env::var(&args.api_key_env).ok().filter(|k| !k.is_empty());
    if config.api_key.is_none() {
        tracing::warn!(var = %args.api_key_env, "no API key in environment; sending unauthenticated requests");
    }
    config.audit_dir = args.audit_dir.clone();
    config.timeout = std::time::Duration::from_secs(args.timeout_secs);
    Ok(Box::new(HttpBackend::new(config).usage("configuring HTTP backend")?))
}

pub fn refine(args: RefineArgs) -> CmdResult {
    let mut manifest = RunManifest::start("refine", &args);
    if args.concurrency == 0 {
        return Err(usage_error("--concurrency must be at least 1"));
    }
    let mode = args.mode.into();
    let kb = match (&args.kb, mode) {
        (Some(kb), _) => Some(load_kb(
            &KbArgs {
                kb: kb.clone(),
                kb_cache: args.kb_cache.clone(),
            },
            &mut manifest,
        )?),
        (None, udrefine_core::refine::RefineMode::WithRetrieval) => {
            return Err(usage_error("--mode with-retrieval requires --kb"))
        }
        (None, _) => None,
    };
    let guidelines = read(&args.guidelines, &mut manifest)?;
    let baseline = load_treebank(&args.baseline, None, &mut manifest)?;
    let input = match &args.input {
        Some(path) => load_treebank(path, None, &mut manifest)?,
        None => baseline.clone(),
    };
    let backend = backend(&args)?;
    let mut cfg = RefineConfig::new(mode, guidelines);
    cfg.k = args.k;
    cfg.max_retries = args.max_retries;

    let run = refine_treebank(&input, &baseline, kb.as_ref(), backend.as_ref(), &cfg, args.concurrency)
        .map_err(|e| match e {
            RefineError::Alignment(_) | RefineError::Retrieval(_) => {
                Failure::Invalid(anyhow::Error::new(e).context("input and baseline"))
            }
            other => Failure::Usage(anyhow::Error::new(other)),
        })?;
    let refined = run.refined_treebank(&args.out.display().to_string());
    write(&args.out, &serialize(&refined), &mut manifest)?;
    println!(
        "{} sentences refined with {}: {} fell back to the baseline, {} flagged needs_council",
        run.manifest.sentence_count, run.manifest.backend, run.manifest.fallback_count, run.manifest.needs_council_count
    );
    manifest.backend = Some(run.manifest.backend.clone());
    manifest.details = serde_json::to_value(&run.manifest).ok();
    finish(manifest, args.manifest.as_deref(), Some(&args.out))
}

pub fn eval_parse(args: EvalParseArgs) -> CmdResult {
    let mut manifest = RunManifest::start("eval-parse", &args);
    let (gold, system) = load_pairs(&args.pair, &mut manifest)?;
    let functional = if args.functional.is_empty() {
        FUNCTIONAL_RELATIONS.iter().map(|r| r.to_string()).collect()
    } else {
        args.functional.iter().map(|r| r.trim().to_string()).filter(|r| !r.is_empty()).collect()
    };
    let report = evaluate_parse(&gold, &system, &functional).invalid("scoring")?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", report.render_text());
    }
    if let Some(out) = &args.out {
        write_json(out, &report, &mut manifest)?;
    }
    finish(manifest, args.manifest.as_deref(), args.out.as_deref())
}

fn campaign_failure(e: CampaignError) -> Failure {
    match e {
        CampaignError::Io { .. } | CampaignError::AlreadyExists(_) | CampaignError::Config(_) => {
            Failure::Usage(e.into())
        }
        other => Failure::Invalid(other.into()),
    }
}

pub fn adjudicate(args: AdjudicateArgs) -> CmdResult {
    let mut manifest = RunManifest::start("adjudicate", &args);
    if args.n == 0 {
        return Err(usage_error("--n 0 would create an empty campaign"));
    }
    if args.annotators.len() != 2 {
        return Err(usage_error(format!("exactly two --annotator flags are required, got {}", args.annotators.len())));
    }
    let (gold, system) = load_pairs(&args.pair, &mut manifest)?;
    let divergences = extract_divergences(&gold, &system).invalid("comparing gold and system")?;
    let groups = sample_items(&divergences, args.n, args.seed).map_err(|e| match e {
        AdjudicationError::SampleTooLarge { .. } => Failure::Usage(e.into()),
        other => Failure::Invalid(other.into()),
    })?;
    let (items, mapping) =
        make_blind_items(&groups, &gold, &system, args.seed.wrapping_add(1)).invalid("building items")?;
    let config = CampaignConfig {
        annotators: args
            .annotators
            .iter()
            .map(|(id, token)| Annotator {
                id: id.clone(),
                token: token.clone(),
            })
            .collect(),
        order_seed: args.order_seed.unwrap_or(args.seed),
        per_annotator_shuffle: args.per_annotator_shuffle,
    };
    let campaign = Campaign::create(&args.out_dir, config, items, mapping).map_err(campaign_failure)?;
    for name in ["campaign.json", "items.json", "secret/mapping.json", "verdicts.jsonl"] {
        manifest.output(&args.out_dir.join(name));
    }
    let sentences: HashSet<&str> = divergences.iter().map(|d| d.sent_id.as_str()).collect();
    println!(
        "{} divergent tokens in {} sentences; {} items written to {}",
        divergences.len(),
        sentences.len(),
        campaign.len(),
        args.out_dir.display()
    );
    finish(manifest, Some(&args.out_dir.join("manifest.json")), None)
}

pub fn serve(args: ServeArgs) -> CmdResult {
    let campaign = Campaign::open(&args.campaign_dir).map_err(campaign_failure)?;
    let runtime = tokio::runtime::Runtime::new().usage("starting runtime")?;
    println!("serving {} items on http://{}", campaign.len(), args.addr);
    runtime
        .block_on(udrefine_server::serve(args.addr, campaign, args.ui_dir))
        .usage(format!("serving on {}", args.addr))
}

pub fn report(args: ReportArgs) -> CmdResult {
    let mut manifest = RunManifest::start("report", &args);
    let campaign = Campaign::open(&args.campaign_dir).map_err(campaign_failure)?;
    for name in ["campaign.json", "items.json", "secret/mapping.json", "verdicts.jsonl"] {
        let path = args.campaign_dir.join(name);
        if let Ok(bytes) = fs::read(&path) {
            manifest.input(&path, &bytes);
        }
    }
    let report = campaign.report(args.partial).map_err(campaign_failure)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", report.render_text());
    }
    if let Some(out) = &args.out {
        write_json(out, &report, &mut manifest)?;
    }
    finish(manifest, args.manifest.as_deref(), args.out.as_deref())
}
