use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use newsaug::augment::{augment_dataset, AugmentConfig, AugmentModels};
use newsaug::corpus::{
    generate_synthetic_dataset, load_labeled_dataset, load_text_corpus, write_labeled_dataset, SynthConfig,
};
use newsaug::embeddings::{
    load_doc_model, load_embeddings, nearest_neighbors, save_doc_model, save_embeddings, train_pvdbow,
    train_word2vec, TrainConfig, TrainMode, TrainStats,
};
use newsaug::eval::{run_experiment, Arm, EmbeddingAugmenter, ExperimentConfig, Identity};
use newsaug::features::{EmbeddingSource, FeatureSpec, FittedFeatures};
use newsaug::models::{Classifier, TrainOptions};
use serde::Serialize;
use serde_json::json;

use crate::{
    AugmentArgs, Command, EvaluateArgs, FeaturizeArgs, ModeArg, NeighborsArgs, SynthArgs, TrainArgs,
    TrainEmbeddingsArgs, UsageError,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::TrainEmbeddings(a) => train_embeddings(a),
        Command::Augment(a) => augment(a),
        Command::Featurize(a) => featurize(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Neighbors(a) => neighbors(a),
        Command::Synth(a) => synth(a),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_losses(stats: &TrainStats) {
    for (i, loss) in stats.epoch_losses.iter().enumerate() {
        eprintln!("epoch={} loss={loss:.6}", i + 1);
    }
}

fn train_embeddings(a: TrainEmbeddingsArgs) -> Result<()> {
    let (corpus, corpus_stats) = load_text_corpus(&a.corpus)?;
    let cfg = TrainConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        initial_lr: a.lr,
        min_count: a.min_count,
        subsample_threshold: a.subsample,
        seed: a.seed,
        mode: match a.mode {
            ModeArg::Skipgram => TrainMode::Skipgram,
            ModeArg::Pvdbow => TrainMode::Pvdbow,
        },
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let (words, doc_path) = match a.mode {
        ModeArg::Skipgram => (train_word2vec(&corpus, &cfg)?, None),
        ModeArg::Pvdbow => {
            let model = train_pvdbow(&corpus, &cfg)?;
            let path = a.doc_out.clone().unwrap_or_else(|| with_suffix(&a.out, ".doc.json"));
            save_doc_model(&model, &path)?;
            (model.word_model, Some(path))
        }
    };
    save_embeddings(&words, &a.out)?;
    print_losses(&words.stats);
    let final_loss = words.stats.epoch_losses.last().copied().unwrap_or(f64::NAN);
    write_json(
        &with_suffix(&a.out, ".meta.json"),
        &json!({
            "command": "train-embeddings",
            "options": &a,
            "train_config": &cfg,
            "corpus": corpus_stats,
            "vocab_size": words.vocab.len(),
            "doc_model": doc_path,
            "epoch_losses": &words.stats.epoch_losses,
        }),
    )?;
    println!(
        "vocab={} tokens={} epochs={} final_loss={final_loss:.6}",
        words.vocab.len(),
        words.stats.tokens_processed,
        cfg.epochs
    );
    Ok(())
}

fn augment(a: AugmentArgs) -> Result<()> {
    if a.quality && a.doc_model.is_none() {
        return Err(usage("--quality requires --doc-model"));
    }
    let cfg = AugmentConfig {
        run: a.run,
        threshold: a.threshold,
        k_neighbors: a.k,
        copies: a.copies,
        seed: a.seed,
        quality_check: a.quality,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let (data, report) = load_labeled_dataset(&a.data)?;
    let words = load_embeddings(&a.word_model)?;
    let docs = a.doc_model.as_ref().map(load_doc_model).transpose()?;
    let models = AugmentModels {
        words: &words,
        docs: docs.as_ref(),
    };
    let (out, diag) = augment_dataset(&data, models, &cfg)?;
    write_labeled_dataset(&a.out, &out)?;
    let diag_path = a.diagnostics.clone().unwrap_or_else(|| with_suffix(&a.out, ".diag.json"));
    write_json(
        &diag_path,
        &json!({
            "command": "augment",
            "options": &a,
            "input_rows": data.len(),
            "skipped_empty_rows": report.skipped_empty,
            "output_rows": out.len(),
            "diagnostics": &diag,
        }),
    )?;
    println!(
        "input={} output={} accepted={} exhausted={} unaugmentable={}",
        data.len(),
        out.len(),
        diag.accepted,
        diag.exhausted,
        diag.unaugmentable
    );
    Ok(())
}

fn feature_spec(
    method: newsaug::features::FeatureMethod,
    max_features: usize,
    embeddings: Option<&PathBuf>,
) -> Result<FeatureSpec> {
    let mut spec = FeatureSpec::new(method).with_max_features(max_features);
    if method.uses_embeddings() {
        let path = embeddings.ok_or_else(|| usage(format!("feature `{method}` requires --embeddings")))?;
        spec = spec.with_embeddings(EmbeddingSource::Path(path.clone()));
    }
    Ok(spec)
}

fn featurize(a: FeaturizeArgs) -> Result<()> {
    let (data, _) = load_labeled_dataset(&a.data)?;
    let spec = feature_spec(a.method, a.max_features, a.embeddings.as_ref())?;
    let sentences = data.sentences();
    let fitted = spec.fit(&sentences)?;
    let x = fitted.transform(&sentences)?;
    x.write_dump(&a.out)?;
    write_json(
        &with_suffix(&a.out, ".meta.json"),
        &json!({
            "command": "featurize",
            "options": &a,
            "rows": x.rows(),
            "cols": x.cols(),
            "empty_rows": x.empty_rows,
            "columns": &x.column_names,
        }),
    )?;
    println!("rows={} cols={} empty_rows={}", x.rows(), x.cols(), x.empty_rows);
    Ok(())
}

#[derive(Serialize)]
struct ModelBundle<'a> {
    format_version: u32,
    options: &'a TrainArgs,
    featurizer: &'a FittedFeatures,
    classifier: &'a Classifier,
}

fn train(a: TrainArgs) -> Result<()> {
    let (data, _) = load_labeled_dataset(&a.data)?;
    let spec = feature_spec(a.feature, a.max_features, a.embeddings.as_ref())?;
    let sentences = data.sentences();
    let fitted = spec.fit(&sentences)?;
    let x = fitted.transform(&sentences)?;
    let opts = TrainOptions {
        seed: a.seed,
        ..TrainOptions::for_kind(a.classifier)
    };
    let clf = Classifier::fit(a.classifier, &x, &data.label_column(), &opts)?;
    let predicted = clf.predict(&x)?;
    let train_f1 = newsaug::eval::weighted_f1(&data.label_column(), &predicted)?;
    write_json(
        &a.out,
        &ModelBundle {
            format_version: 1,
            options: &a,
            featurizer: &fitted,
            classifier: &clf,
        },
    )?;
    println!(
        "rows={} features={} classes={} train_f1={train_f1:.4}",
        x.rows(),
        x.cols(),
        clf.labels.len()
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let augmenting = a.arms.iter().any(|&arm| arm != Arm::Orig);
    if augmenting && a.word_model.is_none() {
        return Err(usage("augmentation arms require --word-model"));
    }
    if a.arms.contains(&Arm::AugQual) && a.doc_model.is_none() {
        return Err(usage("arm aug-qual requires --doc-model"));
    }
    let embedding_path = a.embeddings.as_ref().or(a.word_model.as_ref());
    if a.features.iter().any(|f| f.uses_embeddings()) && embedding_path.is_none() {
        return Err(usage("w2v features require --embeddings or --word-model"));
    }

    let (data, _) = load_labeled_dataset(&a.data)?;
    let feature_vectors = embedding_path.map(load_embeddings).transpose()?.map(Arc::new);
    let cfg = ExperimentConfig {
        k: a.folds,
        seed: a.seed,
        arms: a.arms.clone(),
        features: a.features.clone(),
        classifiers: a.classifiers.clone(),
        max_features: a.max_features,
        augment: AugmentConfig {
            run: a.run,
            threshold: a.threshold,
            k_neighbors: a.k,
            copies: a.copies,
            seed: a.seed,
            quality_check: false,
        },
        ..ExperimentConfig::default()
    };
    cfg.augment.validate().map_err(|e| usage(e.to_string()))?;
    let report = if augmenting {
        let words = match (&a.embeddings, &feature_vectors) {
            (None, Some(v)) => Arc::clone(v),
            _ => Arc::new(load_embeddings(a.word_model.as_ref().unwrap())?),
        };
        let docs = a.doc_model.as_ref().map(load_doc_model).transpose()?.map(Arc::new);
        run_experiment(&data, &cfg, &EmbeddingAugmenter { words, docs }, feature_vectors)?
    } else {
        run_experiment(&data, &cfg, &Identity, feature_vectors)?
    };
    report.write_to(&a.out)?;
    write_json(&a.out.join("command.json"), &json!({ "command": "evaluate", "options": &a }))?;
    println!("arm\tfeature\tclassifier\tmean_f1\tstd_f1");
    for arm in &report.arms {
        for cell in &arm.cells {
            println!(
                "{}\t{}\t{}\t{:.4}\t{:.4}",
                arm.name, cell.feature, cell.classifier, cell.mean_f1, cell.std_f1
            );
        }
    }
    Ok(())
}

fn neighbors(a: NeighborsArgs) -> Result<()> {
    if a.k == 0 {
        return Err(usage("--k must be >= 1"));
    }
    let model = load_embeddings(&a.model)?;
    for n in nearest_neighbors(&model, &a.word, a.k)? {
        println!("{}\t{:.6}", n.token, n.similarity);
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        categories: a.categories,
        per_category: a.per_category,
        vocab_per_category: a.vocab_per_category,
        overlap: a.overlap,
        corpus_lines: a.corpus_lines,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let data = generate_synthetic_dataset(&cfg).map_err(|e| match e {
        newsaug::Error::Configuration(m) => usage(m),
        e => e.into(),
    })?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    write_labeled_dataset(a.out_dir.join("dataset.tsv"), &data.dataset)?;
    let corpus: String = data.corpus.iter().map(|s| s.text() + "\n").collect();
    let corpus_path = a.out_dir.join("corpus.txt");
    fs::write(&corpus_path, corpus).with_context(|| format!("writing {}", corpus_path.display()))?;
    write_json(
        &a.out_dir.join("synth.meta.json"),
        &json!({
            "command": "synth",
            "options": &a,
            "category_labels": &data.category_labels,
            "category_words": &data.category_words,
        }),
    )?;
    println!("records={} corpus_lines={}", data.dataset.len(), data.corpus.len());
    Ok(())
}
