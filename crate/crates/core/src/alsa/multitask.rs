use rand::Rng;

use super::{prediction_from, AlsaConfig, AlsaModel, AlsaOutput, Architecture, Polarity, Prediction};
use crate::ae::{AeConfig, AeModel, AspectSpan};
use crate::crf::{viterbi, BioSequence};
use crate::error::{Error, Result};
use crate::numerics::{Graph, ParamStore, Tensor, Var};

/// A BiGRU shared between a CRF tagger and an ATAE classifier that reads the
/// BiGRU states as its word rows.
#[derive(Clone, Debug)]
pub struct MultitaskModel {
    pub ae: AeModel,
    pub atae: AlsaModel,
}

#[derive(Clone, Debug)]
pub struct MultitaskOutput {
    pub emissions: Var,
    pub shared: Var,
    pub aspects: Vec<AlsaOutput>,
}

impl MultitaskModel {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        embeddings: Tensor,
        ae_config: AeConfig,
        alsa_hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let ae = AeModel::new(store, &format!("{prefix}.ae"), embeddings, ae_config, rng)?;
        let cfg = AlsaConfig {
            hidden: alsa_hidden,
            ..AlsaConfig::new(Architecture::Atae, ae.transfer_dim())
        };
        let atae = AlsaModel::new(store, &format!("{prefix}.atae"), cfg, rng)?;
        Ok(MultitaskModel { ae, atae })
    }

    pub fn forward(&self, g: &mut Graph<'_>, token_ids: &[usize], spans: &[AspectSpan]) -> Result<MultitaskOutput> {
        let (emissions, shared) = self.ae.encode(g, token_ids)?;
        let aspects = spans
            .iter()
            .map(|&s| self.atae.forward(g, shared, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultitaskOutput {
            emissions,
            shared,
            aspects,
        })
    }

    /// Tagging NLL (when gold tags are given) plus one cross-entropy per labelled aspect.
    pub fn loss(
        &self,
        g: &mut Graph<'_>,
        token_ids: &[usize],
        gold_tags: Option<&BioSequence>,
        aspects: &[(AspectSpan, Polarity)],
    ) -> Result<Var> {
        if gold_tags.is_none() && aspects.is_empty() {
            return Err(Error::InvalidArgument("multi-task sample without any annotation".into()));
        }
        let spans: Vec<AspectSpan> = aspects.iter().map(|a| a.0).collect();
        let out = self.forward(g, token_ids, &spans)?;
        let mut terms = Vec::new();
        if let Some(gold) = gold_tags {
            if gold.len() != token_ids.len() {
                return Err(Error::shape(
                    "multitask_loss",
                    format!("{} gold tags for {} tokens", gold.len(), token_ids.len()),
                ));
            }
            terms.push(self.ae.crf.nll(g, out.emissions, gold)?);
        }
        for (o, (_, label)) in out.aspects.iter().zip(aspects) {
            terms.push(g.softmax_cross_entropy(o.logits, label.index())?);
        }
        let mut total = terms[0];
        for &t in &terms[1..] {
            total = g.add(total, t)?;
        }
        Ok(total)
    }

    pub fn predict(
        &self,
        store: &ParamStore,
        token_ids: &[usize],
        spans: &[AspectSpan],
    ) -> Result<(BioSequence, Vec<Prediction>)> {
        let mut g = Graph::new(store);
        let out = self.forward(&mut g, token_ids, spans)?;
        let tags = viterbi(g.value(out.emissions), &self.ae.crf.scores(store))?;
        let preds = out.aspects.iter().map(|o| prediction_from(&g, o)).collect();
        Ok((tags, preds))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{forward_backward, grad_check, rng_from_seed, GradCheckOptions};
    use rand::Rng;

    fn setup(seed: u64) -> (ParamStore, MultitaskModel) {
        let mut rng = rng_from_seed(seed);
        let emb = Tensor::matrix(8, 4, (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let mut store = ParamStore::new();
        let cfg = AeConfig {
            embed_dim: 4,
            hidden: 3,
            fine_tune_embeddings: false,
        };
        let m = MultitaskModel::new(&mut store, "mt", emb, cfg, 4, &mut rng).unwrap();
        (store, m)
    }

    const IDS: [usize; 5] = [1, 4, 2, 7, 3];

    fn gold() -> BioSequence {
        BioSequence::parse("OBIOB").unwrap()
    }

    fn aspects() -> Vec<(AspectSpan, Polarity)> {
        vec![
            (AspectSpan { start: 1, end: 2 }, Polarity::Positive),
            (AspectSpan { start: 4, end: 4 }, Polarity::Neutral),
        ]
    }

    #[test]
    fn joint_loss_is_sum_of_parts() {
        let (store, m) = setup(1);
        let mut g = Graph::new(&store);
        let joint = m.loss(&mut g, &IDS, Some(&gold()), &aspects()).unwrap();
        let joint = g.scalar(joint).unwrap();
        let mut g = Graph::new(&store);
        let ae = m.loss(&mut g, &IDS, Some(&gold()), &[]).unwrap();
        let ae = g.scalar(ae).unwrap();
        let mut g = Graph::new(&store);
        let alsa = m.loss(&mut g, &IDS, None, &aspects()).unwrap();
        let alsa = g.scalar(alsa).unwrap();
        assert!((joint - ae - alsa).abs() < 1e-9);
    }

    #[test]
    fn shared_gru_receives_gradient_from_each_head() {
        let (mut store, m) = setup(2);
        let w = m.ae.gru_fwd.w;
        forward_backward(&mut store, |g| m.loss(g, &IDS, Some(&gold()), &[])).unwrap();
        assert!(store.grad(w).data().iter().any(|&x| x != 0.0));
        forward_backward(&mut store, |g| m.loss(g, &IDS, None, &aspects())).unwrap();
        assert!(store.grad(w).data().iter().any(|&x| x != 0.0));
    }

    #[test]
    fn alpha_sums_to_one() {
        let (store, m) = setup(3);
        let spans: Vec<_> = aspects().iter().map(|a| a.0).collect();
        let (tags, preds) = m.predict(&store, &IDS, &spans).unwrap();
        assert_eq!(tags.len(), 5);
        for p in preds {
            let a = p.alpha.unwrap();
            assert_eq!(a.len(), 5);
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (mut store, m) = setup(4);
        let r = grad_check(
            &mut store,
            |g| m.loss(g, &IDS, Some(&gold()), &aspects()),
            GradCheckOptions::extrapolated(),
        )
        .unwrap();
        assert!(r.max_relative_error < 1e-4, "{:?}", r);
    }

    #[test]
    fn rejects_unannotated_sample() {
        let (store, m) = setup(5);
        let mut g = Graph::new(&store);
        assert!(m.loss(&mut g, &IDS, None, &[]).is_err());
    }
}
