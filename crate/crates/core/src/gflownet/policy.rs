use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{check_dim, invalid, Result};
use crate::neural::{log_softmax_masked, Mlp, MlpGrads, NamedTensor};
use crate::pareto::Preference;
use crate::scalarize::{encode_preference, PreferenceEncoding};

/// Forward policy `P_F(· | s, ω)` and partition head `log Z(ω, c)`.
///
/// The forward network reads the state encoding followed by the encoded
/// preference and emits one logit per action. The partition head reads the
/// encoded preference followed by the episode context of the environment.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalPolicyNet {
    forward: Mlp,
    log_z: Mlp,
    encoding: PreferenceEncoding,
    preference_dim: usize,
    state_len: usize,
    context_len: usize,
}

/// Gradients for both heads of a [`ConditionalPolicyNet`].
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyGrads {
    pub forward: MlpGrads,
    pub log_z: MlpGrads,
}

impl PolicyGrads {
    pub fn zeros_like(policy: &ConditionalPolicyNet) -> Self {
        Self { forward: MlpGrads::zeros_like(&policy.forward), log_z: MlpGrads::zeros_like(&policy.log_z) }
    }

    /// Forward-head gradients first, in the order of
    /// [`ConditionalPolicyNet::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.forward.flatten();
        out.extend(self.log_z.flatten());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.forward.is_finite() && self.log_z.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub encoding: PreferenceEncoding,
    pub preference_dim: usize,
    pub state_len: usize,
    pub context_len: usize,
    pub tensors: Vec<NamedTensor>,
}

impl ConditionalPolicyNet {
    /// Both heads get the hidden widths `hidden`.
    pub fn new<E: Environment + ?Sized, R: Rng + ?Sized>(
        env: &E,
        preference_dim: usize,
        encoding: PreferenceEncoding,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        if preference_dim == 0 {
            return Err(invalid("preference dimension must be at least 1"));
        }
        let pref_len = encoding.encoded_len(preference_dim);
        let state_len = env.encoding_len();
        let context_len = env.context_len();
        let sizes = |input: usize, output: usize| -> Vec<usize> {
            std::iter::once(input).chain(hidden.iter().copied()).chain(std::iter::once(output)).collect()
        };
        let forward = Mlp::new(&sizes(state_len + pref_len, env.num_actions()), rng)?;
        let log_z = Mlp::new(&sizes(pref_len + context_len, 1), rng)?;
        Ok(Self { forward, log_z, encoding, preference_dim, state_len, context_len })
    }

    pub fn forward_net(&self) -> &Mlp {
        &self.forward
    }

    pub fn log_z_net(&self) -> &Mlp {
        &self.log_z
    }

    pub fn encoding(&self) -> PreferenceEncoding {
        self.encoding
    }

    pub fn preference_dim(&self) -> usize {
        self.preference_dim
    }

    pub fn num_actions(&self) -> usize {
        self.forward.output_dim()
    }

    pub fn state_len(&self) -> usize {
        self.state_len
    }

    pub fn context_len(&self) -> usize {
        self.context_len
    }

    pub fn encode_preference(&self, omega: &Preference) -> Result<Vec<f64>> {
        check_dim(self.preference_dim, omega.dim())?;
        encode_preference(omega, self.encoding)
    }

    /// Checks that `env` produces inputs of the sizes this network expects.
    pub fn check_env<E: Environment + ?Sized>(&self, env: &E) -> Result<()> {
        check_dim(self.state_len, env.encoding_len())?;
        check_dim(self.context_len, env.context_len())?;
        check_dim(self.num_actions(), env.num_actions())
    }

    pub fn logits(&self, state_enc: &[f64], pref_enc: &[f64]) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(state_enc.len() + pref_enc.len());
        x.extend_from_slice(state_enc);
        x.extend_from_slice(pref_enc);
        self.forward.forward(&x)
    }

    /// `log Z` for a preference encoding and an episode context.
    pub fn log_z(&self, pref_enc: &[f64], context: &[f64]) -> Result<f64> {
        let mut x = Vec::with_capacity(pref_enc.len() + context.len());
        x.extend_from_slice(pref_enc);
        x.extend_from_slice(context);
        Ok(self.log_z.forward(&x)?[0])
    }

    /// `log Z` for the episode starting at `initial`.
    pub fn log_z_for<E: Environment + ?Sized>(
        &self,
        env: &E,
        initial: &E::State,
        omega: &Preference,
    ) -> Result<f64> {
        let mut ctx = vec![0.0; env.context_len()];
        env.encode_context(initial, &mut ctx);
        self.log_z(&self.encode_preference(omega)?, &ctx)
    }

    /// `log P_F(a | s, ω)` for every action; invalid actions get `-inf`.
    pub fn action_log_probs<E: Environment + ?Sized>(
        &self,
        env: &E,
        state: &E::State,
        omega: &Preference,
    ) -> Result<Vec<f64>> {
        let mut enc = vec![0.0; env.encoding_len()];
        env.encode_state(state, &mut enc);
        let logits = self.logits(&enc, &self.encode_preference(omega)?)?;
        log_softmax_masked(&logits, &env.action_mask(state))
    }

    /// Forward-policy logits for a batch of states under one preference.
    pub(crate) fn batch_logits<E: Environment + ?Sized>(
        &self,
        env: &E,
        states: &[&E::State],
        pref_enc: &[f64],
    ) -> Result<Array2<f64>> {
        let x = self.input_rows(env, states.iter().map(|s| (*s, pref_enc)))?;
        self.forward.forward_batch(x.view())
    }

    /// Rows `state_encoding ⊕ preference_encoding`.
    pub(crate) fn input_rows<'a, E, I>(&self, env: &E, rows: I) -> Result<Array2<f64>>
    where
        E: Environment + ?Sized,
        E::State: 'a,
        I: ExactSizeIterator<Item = (&'a E::State, &'a [f64])>,
    {
        let n = rows.len();
        let width = self.forward.input_dim();
        let mut x = Array2::zeros((n, width));
        for (mut row, (s, p)) in x.rows_mut().into_iter().zip(rows) {
            check_dim(width - self.state_len, p.len())?;
            let row = row.as_slice_mut().ok_or_else(|| invalid("non-contiguous input row"))?;
            env.encode_state(s, &mut row[..self.state_len]);
            row[self.state_len..].copy_from_slice(p);
        }
        Ok(x)
    }

    pub fn num_params(&self) -> usize {
        self.forward.num_params() + self.log_z.num_params()
    }

    /// Forward-head parameters followed by the partition head.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = self.forward.flat_params();
        out.extend(self.log_z.flat_params());
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        check_dim(self.num_params(), params.len())?;
        let (f, z) = params.split_at(self.forward.num_params());
        self.forward.set_flat_params(f)?;
        self.log_z.set_flat_params(z)
    }

    pub(crate) fn nets_mut(&mut self) -> (&mut Mlp, &mut Mlp) {
        (&mut self.forward, &mut self.log_z)
    }

    pub fn to_checkpoint(&self) -> PolicyCheckpoint {
        let mut tensors = self.forward.to_tensors("forward");
        tensors.extend(self.log_z.to_tensors("log_z"));
        PolicyCheckpoint {
            encoding: self.encoding,
            preference_dim: self.preference_dim,
            state_len: self.state_len,
            context_len: self.context_len,
            tensors,
        }
    }

    pub fn from_checkpoint(ck: &PolicyCheckpoint) -> Result<Self> {
        let forward = Mlp::from_tensors("forward", &ck.tensors)?;
        let log_z = Mlp::from_tensors("log_z", &ck.tensors)?;
        let pref_len = ck.encoding.encoded_len(ck.preference_dim);
        check_dim(ck.state_len + pref_len, forward.input_dim())?;
        check_dim(pref_len + ck.context_len, log_z.input_dim())?;
        check_dim(1, log_z.output_dim())?;
        Ok(Self {
            forward,
            log_z,
            encoding: ck.encoding,
            preference_dim: ck.preference_dim,
            state_len: ck.state_len,
            context_len: ck.context_len,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, &self.to_checkpoint())?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::from_checkpoint(&serde_json::from_reader(file)?)
    }
}
