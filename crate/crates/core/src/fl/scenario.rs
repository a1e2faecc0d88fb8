use super::{effective_batch, SimError};
use crate::adversary::{flip_labels, Phase};
use crate::config::{DatasetSource, PartitionConfig, SimConfig};
use crate::data::{holdout_split, load_csv, make_synthetic, partition_dirichlet, partition_iid};
use crate::learning::{Dataset, ModelShape};
use crate::net::TopologyGraph;
use crate::rng::{derive_seed, stream_rng, Stream};

/// Everything a run derives from its configuration before the first event:
/// model shape, data splits, overlay graph and per-device batch sizes.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub shape: ModelShape,
    pub test: Dataset,
    pub train: Vec<Dataset>,
    /// Per-device validation split; absent when the shard is too small.
    pub validation: Vec<Option<Dataset>>,
    pub graph: TopologyGraph,
    pub batch: Vec<usize>,
    pub batch_clamped: Vec<bool>,
}

pub(crate) fn load_dataset(cfg: &SimConfig) -> Result<Dataset, SimError> {
    Ok(match &cfg.dataset.source {
        DatasetSource::Synthetic {
            rows,
            features,
            classes,
            separation,
        } => make_synthetic(*rows, *features, *classes, *separation, derive_seed(cfg.seed, Stream::Data, 0, 0))?,
        DatasetSource::Csv {
            path,
            label_column,
            classes,
        } => load_csv(path, label_column, *classes)?,
    })
}

pub(crate) fn model_shape(cfg: &SimConfig, features: usize, classes: usize) -> Result<ModelShape, SimError> {
    let dims = match &cfg.model.layers {
        Some(l) => l.clone(),
        None if cfg.model.hidden == 0 => vec![features, classes],
        None => vec![features, cfg.model.hidden, classes],
    };
    Ok(ModelShape::new(dims)?)
}

impl Scenario {
    /// Deterministic startup. Does not validate `cfg`; use
    /// [`crate::config::validate`] first for readable errors.
    pub fn build(cfg: &SimConfig) -> Result<Self, SimError> {
        let n = cfg.device_count();
        let full = load_dataset(cfg)?;
        let shape = model_shape(cfg, full.dim(), full.classes())?;

        let part_seed = |k| derive_seed(cfg.seed, Stream::Partition, k, 0);
        let (pool_idx, test_idx) = holdout_split(full.len(), cfg.dataset.test_fraction, part_seed(0));
        let test = full.subset(&test_idx)?;
        let pool = full.subset(&pool_idx)?;
        let plan = match cfg.partition {
            PartitionConfig::Iid => partition_iid(pool.len(), n, part_seed(1))?,
            PartitionConfig::Dirichlet { alpha } => partition_dirichlet(&pool, n, alpha, part_seed(1))?,
        };

        let mut train = Vec::with_capacity(n);
        let mut validation = Vec::with_capacity(n);
        for (i, rows) in plan.assignments.iter().enumerate() {
            let shard = pool.subset(rows)?;
            let (t, v) = holdout_split(
                shard.len(),
                cfg.dataset.validation_fraction,
                derive_seed(cfg.seed, Stream::Validation, i as u64, 0),
            );
            let mut t = shard.subset(&t)?;
            let mut v = if v.is_empty() { None } else { Some(shard.subset(&v)?) };
            if cfg.devices[i].adversary.acts_at(Phase::DataLoad) {
                t = flip_labels(&t)?;
                v = v.map(|v| flip_labels(&v)).transpose()?;
            }
            train.push(t);
            validation.push(v);
        }

        let (lo, hi) = cfg.edge_cap_range();
        let graph = TopologyGraph::generate(n, &cfg.topology.kind, lo, hi, &mut stream_rng(cfg.seed, Stream::Topology, 0, 0))?;

        let (batch, batch_clamped) = cfg
            .devices
            .iter()
            .map(|d| effective_batch(d, cfg.batch_size, &shape, &cfg.timing))
            .unzip();

        Ok(Self {
            shape,
            test,
            train,
            validation,
            graph,
            batch,
            batch_clamped,
        })
    }

    pub fn device_count(&self) -> usize {
        self.train.len()
    }
}
