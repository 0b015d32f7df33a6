//! The ablation grid: prompt-question variants, similarity families, persona
//! ordering, k sweeps, and the component-removal rows (-G, -Q, -P, -D).

use super::{recall_at_1, MetricResult};
use crate::data::SelectionInstance;
use crate::encoder::SelectionModel;
use crate::error::{Error, Result};
use crate::fingerprint::fingerprint;
use crate::grounding::resolve_similarity;
use crate::ranker::{GroundingMode, Method, Ranker, RankerConfig, Ranking};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// A prompt-question variant: a literal string, one training utterance drawn
/// under the run seed, or the empty string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PromptVariant {
    Literal { text: String },
    RandomTrainingUtterance,
    EmptyString,
}

impl PromptVariant {
    /// Resolve to the question text. The random variant samples once per run.
    fn resolve(&self, training_utterances: &[String], rng: &mut ChaCha20Rng) -> Result<String> {
        match self {
            PromptVariant::Literal { text } => Ok(text.clone()),
            PromptVariant::EmptyString => Ok(String::new()),
            PromptVariant::RandomTrainingUtterance => {
                if training_utterances.is_empty() {
                    return Err(Error::Config(
                        "random-utterance prompt variant needs training utterances".into(),
                    ));
                }
                Ok(training_utterances[rng.gen_range(0..training_utterances.len())].clone())
            }
        }
    }

    fn label(&self) -> String {
        match self {
            PromptVariant::Literal { text } => format!("q=\"{text}\""),
            PromptVariant::EmptyString => "q=<empty>".into(),
            PromptVariant::RandomTrainingUtterance => "q=<random-utterance>".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    PromptQuestionVariant,
    SimilarityFamily,
    Order,
    KSweep,
    MinusG,
    MinusQ,
    MinusP,
    MinusD,
}

/// Declarative description of which grid cells to run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationSpec {
    pub axes: Vec<AblationAxis>,
    #[serde(default)]
    pub prompt_questions: Vec<PromptVariant>,
    #[serde(default)]
    pub similarity_families: Vec<String>,
    #[serde(default)]
    pub orders: Vec<crate::ranker::PersonaOrder>,
    #[serde(default)]
    pub k_sweep: Vec<usize>,
    pub seed: u64,
}

impl AblationSpec {
    pub fn validate(&self, persona_size_bound: usize) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Config("ablation spec lists no axes".into()));
        }
        if self.axes.contains(&AblationAxis::KSweep) {
            if self.k_sweep.is_empty() {
                return Err(Error::Config("k_sweep axis requires k values".into()));
            }
            if self.k_sweep.iter().any(|k| *k == 0 || *k > persona_size_bound) {
                return Err(Error::Config(format!(
                    "k_sweep values must lie in 1..={persona_size_bound}"
                )));
            }
        }
        if self.axes.contains(&AblationAxis::PromptQuestionVariant)
            && self.prompt_questions.is_empty()
        {
            return Err(Error::Config(
                "prompt_question_variant axis requires prompt_questions".into(),
            ));
        }
        Ok(())
    }
}

/// Model snapshots the grid may need.
pub struct AblationModels {
    pub standard: SelectionModel,
    /// Prompt-fine-tuned model, when the grid evaluates the fine-tuned rows.
    pub prompted: Option<SelectionModel>,
    /// Standard model trained on an external persona-free corpus (-D rows).
    pub external: Option<SelectionModel>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub label: String,
    pub metric: MetricResult,
}

#[derive(Debug)]
pub struct AblationOutcome {
    pub cells: Vec<GridCell>,
    /// Rankings per cell label, for dumping and offline recomputation.
    pub rankings: BTreeMap<String, Vec<Ranking>>,
}

fn cell_fingerprint(label: &str, cfg: &RankerConfig, sim: &str) -> String {
    fingerprint(&(label, cfg, sim))
}

/// Runs the requested grid over `instances`.
///
/// The baseline prompted configuration (`cfg`) anchors the grid; each axis
/// perturbs exactly one thing. The -P cell reuses the baseline srs rankings
/// outright, so its row is bit-identical to the standard run.
pub fn run_ablation(
    spec: &AblationSpec,
    instances: &[SelectionInstance],
    models: &AblationModels,
    base_cfg: &RankerConfig,
    similarity_name: &str,
    training_utterances: &[String],
) -> Result<AblationOutcome> {
    let persona_bound = instances
        .iter()
        .map(|i| i.persona.len())
        .max()
        .unwrap_or(0);
    spec.validate(persona_bound)?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut cells = Vec::new();
    let mut rankings_by_label: BTreeMap<String, Vec<Ranking>> = BTreeMap::new();

    let similarity = resolve_similarity(similarity_name)?;
    let ranker = Ranker::new(models.standard.clone()).with_similarity(Arc::clone(&similarity));

    let record = |label: String,
                      rankings: Vec<Ranking>,
                      cfg: &RankerConfig,
                      sim: &str,
                      cells: &mut Vec<GridCell>,
                      store: &mut BTreeMap<String, Vec<Ranking>>|
     -> Result<()> {
        let metric = recall_at_1(&rankings, instances, &cell_fingerprint(&label, cfg, sim))?;
        cells.push(GridCell {
            label: label.clone(),
            metric,
        });
        store.insert(label, rankings);
        Ok(())
    };

    // Baseline P5 cell, always present.
    let baseline = ranker.rank_all(instances, base_cfg)?;
    record(
        "p5".into(),
        baseline,
        base_cfg,
        similarity_name,
        &mut cells,
        &mut rankings_by_label,
    )?;
    // Shared srs rankings, reused by -P.
    let srs_cfg = RankerConfig {
        method: Method::Srs,
        ..base_cfg.clone()
    };
    let srs_rankings = ranker.rank_all(instances, &srs_cfg)?;

    for axis in &spec.axes {
        match axis {
            AblationAxis::MinusG => {
                let cfg = RankerConfig {
                    grounding_mode: GroundingMode::AllShuffled { seed: spec.seed },
                    ..base_cfg.clone()
                };
                let r = ranker.rank_all(instances, &cfg)?;
                record("-G".into(), r, &cfg, similarity_name, &mut cells, &mut rankings_by_label)?;
            }
            AblationAxis::MinusQ => {
                let cfg = RankerConfig {
                    prompt_question: String::new(),
                    ..base_cfg.clone()
                };
                let r = ranker.rank_all(instances, &cfg)?;
                record("-Q".into(), r, &cfg, similarity_name, &mut cells, &mut rankings_by_label)?;
            }
            AblationAxis::MinusP => {
                // Definitional equality: the -P row *is* the srs run.
                record(
                    "-P".into(),
                    srs_rankings.clone(),
                    &srs_cfg,
                    similarity_name,
                    &mut cells,
                    &mut rankings_by_label,
                )?;
            }
            AblationAxis::MinusD => {
                let external = models.external.as_ref().ok_or_else(|| {
                    Error::MissingSnapshot(
                        "-D requires the external-corpus-trained standard model".into(),
                    )
                })?;
                let ext_ranker =
                    Ranker::new(external.clone()).with_similarity(Arc::clone(&similarity));
                let r = ext_ranker.rank_all(instances, base_cfg)?;
                record("-D".into(), r, base_cfg, similarity_name, &mut cells, &mut rankings_by_label)?;
                let r = ext_ranker.rank_all(instances, &srs_cfg)?;
                record("-D&P".into(), r, &srs_cfg, similarity_name, &mut cells, &mut rankings_by_label)?;
            }
            AblationAxis::KSweep => {
                for &k in &spec.k_sweep {
                    let cfg = RankerConfig {
                        k,
                        ..base_cfg.clone()
                    };
                    let r = ranker.rank_all(instances, &cfg)?;
                    record(
                        format!("k={k}"),
                        r,
                        &cfg,
                        similarity_name,
                        &mut cells,
                        &mut rankings_by_label,
                    )?;
                }
            }
            AblationAxis::Order => {
                for order in &spec.orders {
                    let cfg = RankerConfig {
                        order: *order,
                        ..base_cfg.clone()
                    };
                    let r = ranker.rank_all(instances, &cfg)?;
                    record(
                        format!("order={order:?}").to_lowercase(),
                        r,
                        &cfg,
                        similarity_name,
                        &mut cells,
                        &mut rankings_by_label,
                    )?;
                }
            }
            AblationAxis::SimilarityFamily => {
                for family in &spec.similarity_families {
                    let sim = resolve_similarity(family)?;
                    let fam_ranker =
                        Ranker::new(models.standard.clone()).with_similarity(sim);
                    let r = fam_ranker.rank_all(instances, base_cfg)?;
                    record(
                        format!("sim={family}"),
                        r,
                        base_cfg,
                        family,
                        &mut cells,
                        &mut rankings_by_label,
                    )?;
                }
            }
            AblationAxis::PromptQuestionVariant => {
                for variant in &spec.prompt_questions {
                    let question = variant.resolve(training_utterances, &mut rng)?;
                    let cfg = RankerConfig {
                        prompt_question: question,
                        ..base_cfg.clone()
                    };
                    let r = ranker.rank_all(instances, &cfg)?;
                    record(
                        variant.label(),
                        r,
                        &cfg,
                        similarity_name,
                        &mut cells,
                        &mut rankings_by_label,
                    )?;
                }
            }
        }
    }

    // Fine-tuned rows when a prompted snapshot is supplied.
    if let Some(prompted) = &models.prompted {
        let ft_ranker = Ranker::new(prompted.clone()).with_similarity(Arc::clone(&similarity));
        let cfg = RankerConfig {
            method: Method::P5Finetuned,
            ..base_cfg.clone()
        };
        let r = ft_ranker.rank_all(instances, &cfg)?;
        record(
            "p5-finetuned".into(),
            r,
            &cfg,
            similarity_name,
            &mut cells,
            &mut rankings_by_label,
        )?;
    }

    Ok(AblationOutcome {
        cells,
        rankings: rankings_by_label,
    })
}

/// One recall cell per prompt-question variant; the random-utterance variant
/// samples exactly once per call under `seed`.
pub fn prompt_variants(
    questions: &[PromptVariant],
    instances: &[SelectionInstance],
    model: &SelectionModel,
    base_cfg: &RankerConfig,
    similarity_name: &str,
    training_utterances: &[String],
    seed: u64,
) -> Result<Vec<GridCell>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let similarity = resolve_similarity(similarity_name)?;
    let ranker = Ranker::new(model.clone()).with_similarity(similarity);
    let mut cells = Vec::new();
    for variant in questions {
        let question = variant.resolve(training_utterances, &mut rng)?;
        let cfg = RankerConfig {
            prompt_question: question,
            ..base_cfg.clone()
        };
        let rankings = ranker.rank_all(instances, &cfg)?;
        let metric = recall_at_1(
            &rankings,
            instances,
            &cell_fingerprint(&variant.label(), &cfg, similarity_name),
        )?;
        cells.push(GridCell {
            label: variant.label(),
            metric,
        });
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::{synth_personachat, SynthConfig};
    use crate::encoder::{ClassificationHead, HashStubEncoder};
    use crate::ranker::PersonaOrder;

    fn stub_model() -> SelectionModel {
        let backend = Arc::new(HashStubEncoder::new(16, 512));
        SelectionModel::new(backend, ClassificationHead::seeded(16, 2)).unwrap()
    }

    fn desk_instances() -> Vec<SelectionInstance> {
        synth_personachat(&SynthConfig {
            n_dialogues: 12,
            exchanges_per_dialogue: 2,
            seed: 21,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn base_models() -> AblationModels {
        AblationModels {
            standard: stub_model(),
            prompted: None,
            external: None,
        }
    }

    fn base_cfg() -> RankerConfig {
        RankerConfig::new(Method::P5Zero)
    }

    #[test]
    fn minus_p_cell_equals_a_direct_srs_run_bit_for_bit() {
        let instances = desk_instances();
        let spec = AblationSpec {
            axes: vec![AblationAxis::MinusP],
            prompt_questions: vec![],
            similarity_families: vec![],
            orders: vec![],
            k_sweep: vec![],
            seed: 3,
        };
        let out = run_ablation(&spec, &instances, &base_models(), &base_cfg(), "contrastive", &[])
            .unwrap();
        let srs_ranker =
            Ranker::new(stub_model()).with_similarity(resolve_similarity("contrastive").unwrap());
        let direct = srs_ranker
            .rank_all(&instances, &RankerConfig::new(Method::Srs))
            .unwrap();
        assert_eq!(out.rankings["-P"], direct);
    }

    #[test]
    fn minus_d_without_snapshot_is_an_actionable_error() {
        let instances = desk_instances();
        let spec = AblationSpec {
            axes: vec![AblationAxis::MinusD],
            prompt_questions: vec![],
            similarity_families: vec![],
            orders: vec![],
            k_sweep: vec![],
            seed: 3,
        };
        let err = run_ablation(&spec, &instances, &base_models(), &base_cfg(), "contrastive", &[])
            .unwrap_err();
        assert!(matches!(err, Error::MissingSnapshot(_)));
    }

    #[test]
    fn k_sweep_produces_one_cell_per_k() {
        let instances = desk_instances();
        let spec = AblationSpec {
            axes: vec![AblationAxis::KSweep],
            prompt_questions: vec![],
            similarity_families: vec![],
            orders: vec![],
            k_sweep: vec![1, 2, 3, 4, 5],
            seed: 3,
        };
        let out = run_ablation(&spec, &instances, &base_models(), &base_cfg(), "contrastive", &[])
            .unwrap();
        // Baseline + 5 sweep cells.
        assert_eq!(out.cells.len(), 6);
        let labels: Vec<&str> = out.cells.iter().map(|c| c.label.as_str()).collect();
        assert!(labels.contains(&"k=1") && labels.contains(&"k=5"));
    }

    #[test]
    fn k_sweep_values_must_fit_the_persona_size() {
        let instances = desk_instances();
        let spec = AblationSpec {
            axes: vec![AblationAxis::KSweep],
            prompt_questions: vec![],
            similarity_families: vec![],
            orders: vec![],
            k_sweep: vec![99],
            seed: 3,
        };
        assert!(
            run_ablation(&spec, &instances, &base_models(), &base_cfg(), "contrastive", &[])
                .is_err()
        );
    }

    #[test]
    fn grid_is_reproducible_under_the_run_seed() {
        let instances = desk_instances();
        let spec = AblationSpec {
            axes: vec![AblationAxis::MinusG, AblationAxis::MinusQ, AblationAxis::Order],
            prompt_questions: vec![],
            similarity_families: vec![],
            orders: vec![PersonaOrder::Ascending, PersonaOrder::Descending],
            k_sweep: vec![],
            seed: 99,
        };
        let a = run_ablation(&spec, &instances, &base_models(), &base_cfg(), "contrastive", &[])
            .unwrap();
        let b = run_ablation(&spec, &instances, &base_models(), &base_cfg(), "contrastive", &[])
            .unwrap();
        let values = |o: &AblationOutcome| -> Vec<(String, f64)> {
            o.cells.iter().map(|c| (c.label.clone(), c.metric.value)).collect()
        };
        assert_eq!(values(&a), values(&b));
    }

    #[test]
    fn fingerprints_change_iff_an_axis_changes() {
        let cfg_a = base_cfg();
        let mut cfg_b = base_cfg();
        cfg_b.k = 3;
        let fp_same = cell_fingerprint("p5", &cfg_a, "contrastive");
        let fp_same2 = cell_fingerprint("p5", &cfg_a, "contrastive");
        let fp_diff_cfg = cell_fingerprint("p5", &cfg_b, "contrastive");
        let fp_diff_sim = cell_fingerprint("p5", &cfg_a, "nli");
        assert_eq!(fp_same, fp_same2);
        assert_ne!(fp_same, fp_diff_cfg);
        assert_ne!(fp_same, fp_diff_sim);
    }

    #[test]
    fn prompt_variants_empty_string_equals_minus_q_cell() {
        let instances = desk_instances();
        let spec = AblationSpec {
            axes: vec![AblationAxis::MinusQ],
            prompt_questions: vec![],
            similarity_families: vec![],
            orders: vec![],
            k_sweep: vec![],
            seed: 5,
        };
        let grid = run_ablation(&spec, &instances, &base_models(), &base_cfg(), "contrastive", &[])
            .unwrap();
        let minus_q = grid
            .cells
            .iter()
            .find(|c| c.label == "-Q")
            .unwrap()
            .metric
            .value;

        let cells = prompt_variants(
            &[PromptVariant::EmptyString],
            &instances,
            &stub_model(),
            &base_cfg(),
            "contrastive",
            &[],
            5,
        )
        .unwrap();
        assert_eq!(cells[0].metric.value, minus_q);
    }

    #[test]
    fn random_utterance_variant_is_seed_deterministic() {
        let instances = desk_instances();
        let utterances: Vec<String> =
            (0..10).map(|i| format!("training utterance {i}")).collect();
        let run = |seed| {
            prompt_variants(
                &[PromptVariant::RandomTrainingUtterance],
                &instances,
                &stub_model(),
                &base_cfg(),
                "contrastive",
                &utterances,
                seed,
            )
            .unwrap()[0]
                .metric
                .value
        };
        assert_eq!(run(7), run(7));
    }
}
