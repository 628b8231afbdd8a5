use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::replay::{ReplayBuffer, Transition};
use crate::action_filter::{masked_argmax, ActionMask};
use crate::error::{Error, Result};
use crate::mdp_env::{IabEnv, StateVector};
use crate::metrics::{EpisodeReport, RunMetrics};
use crate::nn::{clip_global_norm, copy_into_target, AdamState, Checkpoint, Mlp, MlpSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Dqn,
    Ddqn,
    Dueling,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Self::Dqn, Self::Ddqn, Self::Dueling];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dqn => "dqn",
            Self::Ddqn => "ddqn",
            Self::Dueling => "dueling",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(Self::Dqn),
            "ddqn" => Ok(Self::Ddqn),
            "dueling" => Ok(Self::Dueling),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

/// When the target network is refreshed from the online network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSync {
    /// Every `target_update_every` gradient steps.
    Steps,
    /// At the end of every episode.
    Episode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub episodes: usize,
    pub hidden: Vec<usize>,
    pub layer_norm: bool,
    pub learning_rate: f64,
    /// Discount factor.
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_update_every: usize,
    pub target_sync: TargetSync,
    pub epsilon_start: f64,
    /// Multiplicative decay applied once per episode.
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub grad_clip: Option<f64>,
    /// Best-of-N evaluation runs.
    pub eval_tests: usize,
    pub eval_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Dqn,
            episodes: 30_000,
            hidden: vec![1024, 512, 256],
            layer_norm: true,
            learning_rate: 1e-3,
            gamma: 0.99,
            batch_size: 512,
            replay_capacity: 20_000,
            target_update_every: 64,
            target_sync: TargetSync::Steps,
            epsilon_start: 1.0,
            epsilon_decay: 0.9995,
            epsilon_min: 0.05,
            grad_clip: None,
            eval_tests: 100,
            eval_epsilon: 0.05,
        }
    }
}

impl TrainConfig {
    /// Single-core preset: shorter run, narrower network, smaller batches.
    pub fn desk() -> Self {
        Self {
            episodes: 3_000,
            hidden: vec![128, 64, 32],
            batch_size: 64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.gamma) {
            return Err(Error::Config("gamma must lie in [0, 1]".into()));
        }
        if !(unit(self.epsilon_start)
            && unit(self.epsilon_min)
            && unit(self.epsilon_decay)
            && unit(self.eval_epsilon))
        {
            return Err(Error::Config("epsilon settings must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.target_update_every == 0 {
            return Err(Error::Config(
                "batch size, replay capacity and target period must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) || self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("invalid network settings".into()));
        }
        Ok(())
    }
}

/// Exploration rate for episode `k` (0-based).
pub fn epsilon_at(cfg: &TrainConfig, episode: usize) -> f64 {
    (cfg.epsilon_start * cfg.epsilon_decay.powi(episode as i32)).max(cfg.epsilon_min)
}

/// `Q(a) = V + A(a) - mean(A)`.
pub fn dueling_combine(value: f64, advantages: &[f64]) -> Vec<f64> {
    let mean = advantages.iter().sum::<f64>() / advantages.len() as f64;
    advantages.iter().map(|a| value + a - mean).collect()
}

/// Q-network: a plain MLP head, or a dueling head whose first output is
/// the state value and the rest are per-action advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    variant: Variant,
    n_actions: usize,
    mlp: Mlp,
}

impl QNetwork {
    pub fn new(
        variant: Variant,
        state_dim: usize,
        n_actions: usize,
        hidden: &[usize],
        layer_norm: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let spec = MlpSpec {
            input_dim: state_dim,
            hidden: hidden.to_vec(),
            output_dim: Self::output_dim(variant, n_actions),
            layer_norm,
        };
        Ok(Self {
            variant,
            n_actions,
            mlp: Mlp::new(spec, rng)?,
        })
    }

    pub fn from_mlp(variant: Variant, n_actions: usize, mlp: Mlp) -> Result<Self> {
        let expected = Self::output_dim(variant, n_actions);
        if mlp.spec().output_dim != expected {
            return Err(Error::Shape {
                expected,
                actual: mlp.spec().output_dim,
            });
        }
        Ok(Self {
            variant,
            n_actions,
            mlp,
        })
    }

    fn output_dim(variant: Variant, n_actions: usize) -> usize {
        match variant {
            Variant::Dueling => n_actions + 1,
            Variant::Dqn | Variant::Ddqn => n_actions,
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    fn head(&self, raw: &[f64]) -> Vec<f64> {
        match self.variant {
            Variant::Dueling => raw
                .chunks_exact(self.n_actions + 1)
                .flat_map(|row| dueling_combine(row[0], &row[1..]))
                .collect(),
            Variant::Dqn | Variant::Ddqn => raw.to_vec(),
        }
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.q_values_batch(state, 1)
    }

    /// Row-major `batch x n_actions`.
    pub fn q_values_batch(&self, states: &[f64], batch: usize) -> Result<Vec<f64>> {
        Ok(self.head(&self.mlp.forward_batch(states, batch)?))
    }

    /// Squared-error loss on the taken actions; returns (loss, gradients).
    pub fn loss_and_grad(
        &self,
        states: &[f64],
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let batch = actions.len();
        let cache = self.mlp.forward_train(states, batch)?;
        let q = self.head(cache.output());
        let a = self.n_actions;
        let mut dq = vec![0.0; batch * a];
        let mut loss = 0.0;
        for b in 0..batch {
            let err = q[b * a + actions[b]] - targets[b];
            loss += err * err;
            dq[b * a + actions[b]] = 2.0 * err / batch as f64;
        }
        loss /= batch as f64;
        let d_out = match self.variant {
            Variant::Dueling => dq
                .chunks_exact(a)
                .flat_map(|row| {
                    let sum: f64 = row.iter().sum();
                    let mean = sum / a as f64;
                    std::iter::once(sum).chain(row.iter().map(move |g| g - mean))
                })
                .collect(),
            Variant::Dqn | Variant::Ddqn => dq,
        };
        Ok((loss, self.mlp.backward(&cache, &d_out)?))
    }

    /// Stable hash of the parameters.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for p in self.mlp.params() {
            h.update(p.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

/// Epsilon-greedy over the valid actions only.
pub fn select_action<R: Rng>(
    net: &QNetwork,
    state: &StateVector,
    mask: &ActionMask,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        let valid: Vec<usize> = mask.valid_actions().collect();
        return Ok(valid[rng.gen_range(0..valid.len())]);
    }
    let q = net.q_values(state.as_slice())?;
    Ok(masked_argmax(&q, mask))
}

fn masked_best(q: &[f64], valid: &[bool]) -> usize {
    masked_argmax(q, &ActionMask::from_vec(valid.to_vec()))
}

/// Bootstrap targets. Terminal transitions keep only the reward; the
/// max/argmax ranges over each transition's valid next actions.
pub fn td_targets(
    batch: &[&Transition],
    variant: Variant,
    online: &QNetwork,
    target: &QNetwork,
    gamma: f64,
) -> Result<Vec<f64>> {
    let n = batch.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let a = target.n_actions();
    let next: Vec<f64> = batch
        .iter()
        .flat_map(|t| t.next_state.as_slice().iter().copied())
        .collect();
    let q_target = target.q_values_batch(&next, n)?;
    let q_online = match variant {
        Variant::Ddqn => Some(online.q_values_batch(&next, n)?),
        Variant::Dqn | Variant::Dueling => None,
    };
    Ok(batch
        .iter()
        .enumerate()
        .map(|(b, t)| {
            if t.done {
                return t.reward;
            }
            let row = &q_target[b * a..(b + 1) * a];
            let bootstrap = match &q_online {
                Some(qo) => row[masked_best(&qo[b * a..(b + 1) * a], &t.next_valid)],
                None => row[masked_best(row, &t.next_valid)],
            };
            t.reward + gamma * bootstrap
        })
        .collect())
}

/// Online and target networks with their optimiser, replay memory and
/// generator.
#[derive(Debug, Clone)]
pub struct Agent {
    pub online: QNetwork,
    pub target: QNetwork,
    adam: AdamState,
    rng: ChaCha8Rng,
    buffer: ReplayBuffer,
    config: TrainConfig,
    grad_steps: u64,
    last_loss: Option<f64>,
}

impl Agent {
    pub fn new(
        config: &TrainConfig,
        state_dim: usize,
        n_actions: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = QNetwork::new(
            config.variant,
            state_dim,
            n_actions,
            &config.hidden,
            config.layer_norm,
            &mut rng,
        )?;
        let target = QNetwork {
            mlp: copy_into_target(&online.mlp),
            ..online.clone()
        };
        let adam = AdamState::new(online.mlp.num_params(), config.learning_rate);
        Ok(Self {
            online,
            target,
            adam,
            rng,
            buffer: ReplayBuffer::new(config.replay_capacity),
            config: config.clone(),
            grad_steps: 0,
            last_loss: None,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn act(&mut self, state: &StateVector, mask: &ActionMask, epsilon: f64) -> Result<usize> {
        select_action(&self.online, state, mask, epsilon, &mut self.rng)
    }

    pub fn sync_target(&mut self) {
        self.target.mlp = copy_into_target(&self.online.mlp);
    }

    /// Stores a transition and, once the buffer holds a full batch, takes
    /// one gradient step. Returns true when the target was synced.
    pub fn observe(&mut self, transition: Transition) -> Result<bool> {
        self.buffer.push(transition);
        if self.buffer.len() < self.config.batch_size {
            return Ok(false);
        }
        self.learn()?;
        let synced = self.config.target_sync == TargetSync::Steps
            && self
                .grad_steps
                .is_multiple_of(self.config.target_update_every as u64);
        if synced {
            self.sync_target();
        }
        Ok(synced)
    }

    fn learn(&mut self) -> Result<()> {
        let batch = self.buffer.sample(&mut self.rng, self.config.batch_size);
        let targets = td_targets(
            &batch,
            self.config.variant,
            &self.online,
            &self.target,
            self.config.gamma,
        )?;
        let states: Vec<f64> = batch
            .iter()
            .flat_map(|t| t.state.as_slice().iter().copied())
            .collect();
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let (loss, mut grads) = self.online.loss_and_grad(&states, &actions, &targets)?;
        if let Some(clip) = self.config.grad_clip {
            clip_global_norm(&mut grads, clip);
        }
        self.adam.step(self.online.mlp.params_mut(), &grads)?;
        self.grad_steps += 1;
        self.last_loss = Some(loss);
        Ok(())
    }

    pub fn end_episode(&mut self) {
        if self.config.target_sync == TargetSync::Episode {
            self.sync_target();
        }
    }

    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            variant: self.config.variant,
            n_actions: self.online.n_actions,
            grad_steps: self.grad_steps,
            target_params: self.target.mlp.params().to_vec(),
            online: Checkpoint::new(&self.online.mlp, &self.adam, &self.rng),
        }
    }
}

/// Checkpoint file contents for an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub variant: Variant,
    pub n_actions: usize,
    pub grad_steps: u64,
    pub target_params: Vec<f64>,
    pub online: Checkpoint,
}

impl AgentCheckpoint {
    /// Online network only, for evaluation.
    pub fn q_network(&self) -> Result<QNetwork> {
        let (mlp, _, _) = self.online.restore()?;
        QNetwork::from_mlp(self.variant, self.n_actions, mlp)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    /// Record real elapsed time; otherwise `wall_ms` stays 0 so metric
    /// files are reproducible byte for byte.
    pub wall_clock: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub metrics: RunMetrics,
}

/// Episode loop: filter, select, step, store, learn; epsilon decays per
/// episode.
pub fn train(
    env: &mut IabEnv,
    config: &TrainConfig,
    seed: u64,
    opts: TrainOptions,
) -> Result<TrainOutcome> {
    let mut agent = Agent::new(config, env.state_dim(), env.num_actions(), seed)?;
    let mut metrics = RunMetrics::default();
    let started = Instant::now();
    for episode in 0..config.episodes {
        let epsilon = epsilon_at(config, episode);
        let mut state = env.reset(seed.wrapping_add(episode as u64));
        let mut total = 0.0;
        loop {
            let mask = env.valid_actions().clone();
            let action = agent.act(&state, &mask, epsilon)?;
            let step = env.step(action)?;
            total += step.reward;
            agent.observe(Transition {
                state,
                action,
                reward: step.reward,
                next_state: step.state.clone(),
                done: step.done,
                next_valid: env.valid_actions().as_slice().to_vec(),
            })?;
            state = step.state;
            if step.done {
                break;
            }
        }
        agent.end_episode();
        metrics.episodes.push(EpisodeReport {
            episode,
            reward: total,
            epsilon,
            nodes_deployed: env.network().num_nodes(),
            coverage: env.network().coverage_fraction(),
            steps: env.steps(),
            wall_ms: if opts.wall_clock {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
        });
    }
    Ok(TrainOutcome { agent, metrics })
}
