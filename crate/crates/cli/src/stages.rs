//! One function per subcommand. Each reads its inputs, runs the library
//! stage and writes artifacts headed by a provenance block.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Write as _};
use std::path::Path;

use langflow::corpus::{self, Corpus, PreprocessConfig, StopWords, Vocabulary};
use langflow::flow::{self, Bucketing, FlowData, TimeBucket, Weighting};
use langflow::plda::{self, InferOptions, LabelSpace, PldaConfig, TrainedModel};
use langflow::provenance::{digest_path, Provenance};
use langflow::stats::{self, BorrowingVector, VerdictOptions};
use langflow::synth::{self, Injection, PlantedCorpus, PlantedSpec};
use langflow::taxonomy::{self, Curation, Dendrogram, LabelTaxonomy, Tier};
use langflow::{tsv, Error, Result};
use log::info;

use crate::{
    AnalyzeArgs, ClusterArgs, Common, InferArgs, ModelArgs, PreprocessArgs, ScopeArgs, SynthArgs, TrainArgs,
    ValidateArgs,
};

fn init_threads(common: &Common) -> Result<()> {
    if common.threads < 1 {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    // Only the first call in a process takes effect; tests may call twice.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(common.threads).build_global();
    Ok(())
}

fn year_range(text: &str) -> Result<(i32, i32)> {
    let bad = || Error::Config(format!("bad year range {text:?} (expected FIRST-LAST)"));
    let (a, b) = text.split_once('-').ok_or_else(bad)?;
    let (a, b): (i32, i32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

/// Refuse to continue when `path` is not the input `name` recorded upstream.
fn check_digest(upstream: &Provenance, name: &str, path: &Path, force: bool) -> Result<String> {
    let found = digest_path(path)?;
    match upstream.inputs.get(name) {
        Some(expected) if *expected != found => {
            if force {
                log::warn!("{name} digest differs from the upstream record; continuing because of --force");
            } else {
                return Err(Error::DigestMismatch {
                    input: name.to_string(),
                    expected: expected.clone(),
                    found,
                });
            }
        }
        _ => {}
    }
    Ok(found)
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    let corpus = corpus::read_bundle(path)?;
    info!("{}: {} documents, {} terms", path.display(), corpus.documents.len(), corpus.vocabulary.len());
    Ok(corpus)
}

pub fn preprocess(args: PreprocessArgs) -> Result<()> {
    init_threads(&args.common)?;
    let (first, last) = year_range(&args.years)?;
    let stopwords = StopWords::load(&args.stopwords)?;
    let file = File::open(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let (records, mut unreadable) =
        corpus::read_records(BufReader::new(file)).map_err(|e| Error::io(&args.input, e))?;
    let config = PreprocessConfig {
        min_df: args.min_df,
        include_title: !args.no_title,
        years: first..=last,
    };
    let (corpus, report) = corpus::preprocess(&records, &stopwords, &config)?;
    if corpus.documents.is_empty() {
        return Err(Error::Data("no documents survive preprocessing".into()));
    }
    let prov = Provenance::new("preprocess")
        .config("min-df", args.min_df)
        .config("years", format!("{first}-{last}"))
        .config("title", !args.no_title)
        .input("records", digest_path(&args.input)?)
        .input("stopwords", digest_path(&args.stopwords)?);
    corpus::write_bundle(&args.out, &corpus, &prov)?;

    unreadable.extend(report.skipped);
    let mut diag = prov.header();
    diag.push_str("record\treason\n");
    for d in &unreadable {
        writeln!(diag, "{}\t{}", d.record, d.reason.replace(['\t', '\n'], " ")).unwrap();
    }
    for id in &report.dropped {
        writeln!(diag, "{id}\tno tokens survive preprocessing").unwrap();
    }
    tsv::write_string(&args.out.join("diagnostics.tsv"), &diag)?;
    println!(
        "{} documents, {} terms ({} records skipped, {} dropped)",
        corpus.documents.len(),
        corpus.vocabulary.len(),
        unreadable.len(),
        report.dropped.len()
    );
    Ok(())
}

pub fn cluster_subjects(args: ClusterArgs) -> Result<()> {
    init_threads(&args.common)?;
    let mut prov = Provenance::new("cluster-subjects").config("areas", args.areas);
    let dendrogram = match (&args.corpus, &args.dendrogram) {
        (Some(path), _) => {
            let corpus = read_corpus(path)?;
            let subjects: Vec<String> = corpus
                .documents
                .iter()
                .flat_map(|d| d.labels.iter().cloned())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let (vectors, empty) = taxonomy::subject_vectors(&corpus, &subjects);
            if !empty.is_empty() {
                log::warn!("{} subjects have no documents and are left out", empty.len());
            }
            prov = prov.input("corpus", digest_path(path)?);
            taxonomy::single_link_hac(&vectors)?
        }
        (None, Some(path)) => {
            prov = prov.input("dendrogram", digest_path(path)?);
            Dendrogram::load(path)?
        }
        (None, None) => return Err(Error::Config("one of --corpus or --dendrogram is required".into())),
    };
    let curation = match &args.curation {
        Some(path) => {
            prov = prov.input("curation", digest_path(path)?);
            Curation::load(path)?
        }
        None => Curation::default(),
    };
    let taxonomy = taxonomy::cut_to_areas(&dendrogram, &curation, args.areas)?;
    if args.corpus.is_some() {
        tsv::write_string(&args.out.join("dendrogram.tsv"), &dendrogram.to_tsv(&prov.header()))?;
    }
    tsv::write_string(&args.out.join("taxonomy.tsv"), &(prov.header() + &taxonomy.to_tsv()))?;
    println!(
        "{} subjects into {} areas under {} broad areas",
        taxonomy.subjects().len(),
        taxonomy.areas().len(),
        taxonomy.broad_areas().len()
    );
    Ok(())
}

fn plda_config(m: &ModelArgs, threads: usize) -> Result<PldaConfig> {
    let mut topic_overrides = BTreeMap::new();
    for spec in &m.topic_override {
        let parsed = spec.split_once('=').and_then(|(l, k)| Some((l.trim().to_string(), k.trim().parse().ok()?)));
        let (label, k) = parsed.ok_or_else(|| Error::Config(format!("bad topic override {spec:?} (expected LABEL=K)")))?;
        topic_overrides.insert(label, k);
    }
    let config = PldaConfig {
        topics_per_label: m.topics_per_label,
        background_topics: m.background_topics,
        topic_overrides,
        alpha: m.alpha,
        eta: m.eta,
        sweeps: m.sweeps,
        burn_in: m.burn_in,
        lag: m.lag,
        infer_sweeps: m.infer_sweeps,
        infer_burn_in: m.infer_burn_in,
        seed: m.seed,
        threads,
    };
    config.validate()?;
    Ok(config)
}

fn train_provenance(config: &PldaConfig, tier: Tier) -> Provenance {
    let overrides: Vec<String> = config.topic_overrides.iter().map(|(l, k)| format!("{l}={k}")).collect();
    Provenance::new("train")
        .seed(config.seed)
        .config("alpha", config.alpha)
        .config("eta", config.eta)
        .config("topics-per-label", config.topics_per_label)
        .config("background-topics", config.background_topics)
        .config("topic-overrides", overrides.join(","))
        .config("sweeps", config.sweeps)
        .config("burn-in", config.burn_in)
        .config("lag", config.lag)
        .config("infer-sweeps", config.infer_sweeps)
        .config("infer-burn-in", config.infer_burn_in)
        .config("threads", config.threads)
        .config("tier", tier)
}

fn train_model(corpus: &Corpus, taxonomy: &LabelTaxonomy, tier: Tier, config: &PldaConfig) -> Result<TrainedModel> {
    let docs = taxonomy::relabel_documents(&corpus.documents, taxonomy, tier)?;
    let space = LabelSpace::from_taxonomy(taxonomy, tier, config)?;
    info!("training {} topics over {} labels", space.total_topics(), space.len());
    plda::train(&docs, &corpus.vocabulary, &space, config)
}

pub fn train(args: TrainArgs) -> Result<()> {
    init_threads(&args.common)?;
    let tier: Tier = args.model.tier.parse()?;
    let config = plda_config(&args.model, args.common.threads)?;
    let corpus = read_corpus(&args.corpus)?;
    let taxonomy = LabelTaxonomy::load(&args.taxonomy)?;
    let mut model = train_model(&corpus, &taxonomy, tier, &config)?;
    let prov = train_provenance(&config, tier)
        .input("corpus", digest_path(&args.corpus)?)
        .input("taxonomy", digest_path(&args.taxonomy)?);
    model.provenance = Some(prov.clone());
    model.write(&args.out)?;

    if let Some(path) = &args.top_terms_out {
        let mut text = prov.header();
        text.push_str("label\trank\tterm\tweight\n");
        for label in model.space.names() {
            for (rank, (term, weight)) in model.top_terms(label, args.top_n)?.overall.iter().enumerate() {
                writeln!(text, "{label}\t{}\t{term}\t{}", rank + 1, stats::fmt_num(*weight)).unwrap();
            }
        }
        tsv::write_string(path, &text)?;
    }
    println!("{} topics, {} snapshots", model.total_topics(), model.snapshots);
    Ok(())
}

/// Documents expressed over the model's vocabulary.
fn model_documents(corpus: &Corpus, model: &TrainedModel) -> Result<Vec<corpus::Document>> {
    if corpus.vocabulary.terms() == model.vocabulary.as_slice() {
        return Ok(corpus.documents.clone());
    }
    log::warn!("corpus vocabulary differs from the model's; terms unknown to the model are dropped");
    let to = Vocabulary::from_terms(model.vocabulary.iter().map(|t| (t.clone(), 0)).collect())?;
    Ok(corpus::reindex(&corpus.documents, &corpus.vocabulary, &to))
}

pub fn infer(args: InferArgs) -> Result<()> {
    init_threads(&args.common)?;
    let model = TrainedModel::read(&args.model)?;
    let upstream = model.provenance.clone().unwrap_or_else(|| Provenance::new(""));
    let corpus_digest = check_digest(&upstream, "corpus", &args.corpus, args.force)?;
    let corpus = read_corpus(&args.corpus)?;
    let docs = model_documents(&corpus, &model)?;

    let mut options = InferOptions::from_config(&model.config);
    options.sweeps = args.sweeps.unwrap_or(options.sweeps);
    options.burn_in = args.burn_in.unwrap_or(options.burn_in);
    options.seed = args.seed.unwrap_or(options.seed);
    if options.sweeps <= options.burn_in {
        return Err(Error::Config("inference sweeps must exceed inference burn-in".into()));
    }
    let result = plda::infer(&model, &docs, &options)?;

    let mut prov = Provenance::new("infer")
        .seed(options.seed)
        .config("infer-sweeps", options.sweeps)
        .config("infer-burn-in", options.burn_in)
        .config("alpha", options.alpha)
        .config("tier", upstream.config.get("tier").map(String::as_str).unwrap_or("area"))
        .input("corpus", corpus_digest)
        .input("model", digest_path(&args.model)?);
    if let Some(t) = upstream.inputs.get("taxonomy") {
        prov = prov.input("taxonomy", t.clone());
    }
    if let Some(k) = upstream.config.get("topics-per-label") {
        prov = prov.config("topics-per-label", k);
    }
    plda::write_attributions(&args.out, &result, &prov)?;
    println!("{} documents attributed, {} skipped", result.documents.len(), result.skipped.len());
    Ok(())
}

/// Areas analyzed: the taxonomy's, minus professional broad areas unless
/// included, narrowed by the allow list and then the deny list.
fn analysis_scope(taxonomy: &LabelTaxonomy, scope: &ScopeArgs) -> Result<Vec<String>> {
    for a in scope.areas.iter().chain(&scope.exclude_areas) {
        if !taxonomy.areas().contains(a) {
            return Err(Error::UnknownLabel(a.clone()));
        }
    }
    let mut areas = if scope.professional_areas == "include" {
        taxonomy.areas().to_vec()
    } else {
        taxonomy.areas_excluding(&scope.professional_broad_areas)
    };
    if !scope.areas.is_empty() {
        areas.retain(|a| scope.areas.contains(a));
    }
    areas.retain(|a| !scope.exclude_areas.contains(a));
    if areas.len() < 2 {
        return Err(Error::Config(format!("analysis scope has {} areas; at least 2 are needed", areas.len())));
    }
    Ok(areas)
}

fn scope_provenance(mut prov: Provenance, scope: &ScopeArgs, areas: &[String]) -> Provenance {
    prov = prov
        .config("buckets", &scope.buckets)
        .config("weighting", &scope.weighting)
        .config("professional-areas", &scope.professional_areas)
        .config("professional-broad-areas", scope.professional_broad_areas.join(","))
        .config("scope", areas.join(","));
    prov
}

fn weighting(text: &str) -> Result<Weighting> {
    match text {
        "tokens" => Ok(Weighting::Tokens),
        "documents" => Ok(Weighting::Documents),
        other => Err(Error::Config(format!("unknown weighting {other:?} (tokens or documents)"))),
    }
}

fn attribution_tier(prov: &Provenance) -> Result<Tier> {
    prov.config.get("tier").map(|t| t.parse()).unwrap_or(Ok(Tier::Area))
}

fn whole_period(data: &FlowData) -> Result<TimeBucket> {
    let (first, last) = data
        .year_range()
        .ok_or_else(|| Error::Data("no attributed documents fall in the analysis scope".into()))?;
    Ok(TimeBucket::new("all", first, last))
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    init_threads(&args.common)?;
    let bucketing: Bucketing = args.scope.buckets.parse()?;
    let weighting = weighting(&args.scope.weighting)?;
    let (attribution, upstream) = plda::read_attributions(&args.attribution)?;
    let corpus_digest = check_digest(&upstream, "corpus", &args.corpus, args.force)?;
    let taxonomy_digest = check_digest(&upstream, "taxonomy", &args.taxonomy, args.force)?;
    let tier = attribution_tier(&upstream)?;
    let corpus = read_corpus(&args.corpus)?;
    let taxonomy = LabelTaxonomy::load(&args.taxonomy)?;
    let areas = analysis_scope(&taxonomy, &args.scope)?;
    let data = FlowData::from_taxonomy(&attribution, &corpus.documents, &taxonomy, tier, &areas)?;
    let whole = whole_period(&data)?;
    let buckets = bucketing.buckets(whole.start, whole.end);

    let prov = scope_provenance(Provenance::new("analyze").seed(args.seed), &args.scope, &areas)
        .config("resamples", args.resamples)
        .config("score-buckets", &args.score_buckets)
        .config("series", args.series.join(","))
        .config("chord-floor", args.chord_floor)
        .input("corpus", corpus_digest)
        .input("taxonomy", taxonomy_digest)
        .input("attribution", digest_path(&args.attribution)?);
    let out = &args.out;

    let whole_matrix = flow::incorporation_matrix(&data, &whole, weighting);
    whole_matrix.write(&out.join("matrix-all.tsv"), &prov)?;
    for b in buckets.iter().filter(|b| b.label != "all") {
        flow::incorporation_matrix(&data, b, weighting).write(&out.join(format!("matrix-{}.tsv", b.label)), &prov)?;
    }

    let mut pairs: Vec<(String, String)> = Vec::new();
    for spec in &args.series {
        if spec == "all" {
            for s in &areas {
                for t in areas.iter().filter(|t| *t != s) {
                    pairs.push((s.clone(), t.clone()));
                }
            }
        } else {
            let (s, t) = spec
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("bad series {spec:?} (expected SOURCE:TARGET)")))?;
            pairs.push((s.to_string(), t.to_string()));
        }
    }
    let series = pairs
        .iter()
        .map(|(s, t)| flow::flow_series(&data, s, t, &buckets, weighting, args.resamples, args.seed))
        .collect::<Result<Vec<_>>>()?;
    flow::write_series(&out.join("series.tsv"), &series, &prov)?;

    let options = VerdictOptions {
        resamples: args.resamples,
        seed: args.seed,
        weighting,
    };
    let score_buckets = if args.score_buckets == "buckets" {
        buckets.clone()
    } else {
        vec![whole.clone()]
    };
    let mut scores = Vec::new();
    for b in &score_buckets {
        let verdicts = stats::all_pair_verdicts(&data, &areas, b, &options)?;
        stats::write_verdicts(&out.join(format!("verdicts-{}.tsv", b.label)), &verdicts, &prov)?;
        scores.extend(stats::net_source_scores(&areas, &verdicts, &b.label));
    }
    stats::write_scores(&out.join("scores.tsv"), &scores, &prov)?;

    let edges = flow::chord_export(&whole_matrix, &taxonomy, args.chord_floor);
    flow::write_chord(&out.join("chord.jsonl"), &edges, &prov)?;

    let mut summary = String::new();
    for s in scores.iter().filter(|s| s.bucket == score_buckets[0].label) {
        write!(summary, " {}={}", s.area, s.score).unwrap();
    }
    println!("{} areas, {} buckets; S:{summary}", areas.len(), buckets.len());
    Ok(())
}

pub fn validate(args: ValidateArgs) -> Result<()> {
    init_threads(&args.common)?;
    let bucketing: Bucketing = args.scope.buckets.parse()?;
    let weighting = weighting(&args.scope.weighting)?;
    let corpus = read_corpus(&args.corpus)?;
    let taxonomy = LabelTaxonomy::load(&args.taxonomy)?;
    let areas = analysis_scope(&taxonomy, &args.scope)?;
    let corpus_digest = digest_path(&args.corpus)?;
    let taxonomy_digest = digest_path(&args.taxonomy)?;

    let mut prov = scope_provenance(Provenance::new("validate"), &args.scope, &areas)
        .input("corpus", corpus_digest)
        .input("taxonomy", taxonomy_digest);

    let mut models: Vec<(String, plda::AttributionResult, Tier)> = Vec::new();
    if args.family.is_empty() {
        for path in &args.attribution {
            let (attribution, upstream) = plda::read_attributions(path)?;
            check_digest(&upstream, "corpus", &args.corpus, args.force)?;
            check_digest(&upstream, "taxonomy", &args.taxonomy, args.force)?;
            let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            prov = prov.input(&format!("attribution.{name}"), digest_path(path)?);
            models.push((name, attribution, attribution_tier(&upstream)?));
        }
    } else {
        let tier: Tier = args.model.tier.parse()?;
        let base = plda_config(&args.model, args.common.threads)?;
        prov = prov
            .seed(base.seed)
            .config("family", args.family.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","))
            .config("tier", tier)
            .config("alpha", base.alpha)
            .config("eta", base.eta)
            .config("sweeps", base.sweeps)
            .config("burn-in", base.burn_in)
            .config("lag", base.lag)
            .config("infer-sweeps", base.infer_sweeps)
            .config("infer-burn-in", base.infer_burn_in);
        for &k in &args.family {
            let config = PldaConfig {
                topics_per_label: k,
                ..base.clone()
            };
            config.validate()?;
            let model = train_model(&corpus, &taxonomy, tier, &config)?;
            let attribution = plda::infer(&model, &corpus.documents, &InferOptions::from_config(&config))?;
            models.push((format!("K={k}"), attribution, tier));
        }
    }
    if models.len() < 2 {
        return Err(Error::Config("validation needs at least two models".into()));
    }

    let mut vectors = Vec::with_capacity(models.len());
    for (name, attribution, tier) in &models {
        let data = FlowData::from_taxonomy(attribution, &corpus.documents, &taxonomy, *tier, &areas)?;
        let whole = whole_period(&data)?;
        let buckets = bucketing.buckets(whole.start, whole.end);
        vectors.push(BorrowingVector::from_flow(name, &data, &areas, &buckets, weighting)?);
    }
    let report = stats::consistency_report(&vectors)?;
    report.write(&args.out, &prov)?;
    match report.min_off_diagonal() {
        Some(r) => println!("{} models; minimum pairwise correlation {}", models.len(), stats::fmt_num(r)),
        None => println!("{} models; correlations undefined", models.len()),
    }
    Ok(())
}

fn area_index(name: &str, areas: usize) -> Result<usize> {
    (0..areas)
        .find(|&i| synth::area_name(i, areas) == name)
        .ok_or_else(|| Error::Config(format!("unknown synthetic area {name:?}")))
}

fn injection(spec: &str, areas: usize) -> Result<Injection> {
    let bad = || Error::Config(format!("bad injection {spec:?} (expected SOURCE:TARGET:RATE or SOURCE:TARGET:R0-R1)"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [source, target, rate] = parts[..] else { return Err(bad()) };
    let (r0, r1) = rate.split_once('-').unwrap_or((rate, rate));
    let (r0, r1): (f64, f64) = (r0.parse().map_err(|_| bad())?, r1.parse().map_err(|_| bad())?);
    if ![r0, r1].iter().all(|r| (0.0..1.0).contains(r)) {
        return Err(bad());
    }
    Ok(Injection {
        source: area_index(source, areas)?,
        target: area_index(target, areas)?,
        rate: (r0, r1),
    })
}

/// Stopwords sprinkled into synthetic abstracts so preprocessing has
/// something to remove.
const SYNTH_STOPWORDS: [&str; 4] = ["the", "of", "and", "in"];

pub fn synth(args: SynthArgs) -> Result<()> {
    init_threads(&args.common)?;
    let spec = PlantedSpec {
        areas: args.areas,
        terms_per_area: args.terms_per_area,
        background_terms: args.background_terms,
        docs_per_area: args.docs_per_area,
        tokens_per_doc: args.tokens_per_doc,
        noise: args.noise,
        background_rate: args.background_rate,
        zipf_exponent: args.zipf_exponent,
        years: year_range(&args.years)?,
        injections: args.inject.iter().map(|s| injection(s, args.areas)).collect::<Result<_>>()?,
        broad_areas: args.broad_areas,
        seed: args.seed,
    };
    let planted = PlantedCorpus::generate(&spec)?;
    let prov = Provenance::new("synth")
        .seed(args.seed)
        .config("areas", args.areas)
        .config("terms-per-area", args.terms_per_area)
        .config("background-terms", args.background_terms)
        .config("docs-per-area", args.docs_per_area)
        .config("tokens-per-doc", args.tokens_per_doc)
        .config("noise", args.noise)
        .config("background-rate", args.background_rate)
        .config("zipf-exponent", args.zipf_exponent)
        .config("years", &args.years)
        .config("broad-areas", args.broad_areas)
        .config("inject", args.inject.join(","));

    let path = args.out.join("records.jsonl");
    let mut out = tsv::create(&path)?;
    let io = |e: std::io::Error| Error::io(&path, e);
    out.write_all(prov.json_line().as_bytes()).map_err(io)?;
    for (n, mut record) in planted.raw_records().into_iter().enumerate() {
        let words: Vec<&str> = record.abstract_text.split(' ').collect();
        let mut text = String::new();
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            if i % 7 == 3 {
                text.push_str(SYNTH_STOPWORDS[(n + i) % SYNTH_STOPWORDS.len()]);
                text.push(' ');
            }
            text.push_str(w);
        }
        record.abstract_text = text;
        writeln!(out, "{}", serde_json::to_string(&record).expect("records serialize")).map_err(io)?;
    }
    out.flush().map_err(io)?;

    let mut stop = prov.header();
    for w in SYNTH_STOPWORDS {
        stop.push_str(w);
        stop.push('\n');
    }
    tsv::write_string(&args.out.join("stopwords.txt"), &stop)?;
    tsv::write_string(&args.out.join("taxonomy.tsv"), &(prov.header() + &planted.taxonomy.to_tsv()))?;
    println!("{} records over {} areas", planted.corpus.documents.len(), planted.areas.len());
    Ok(())
}
