//! The AC and MCL training phases and task-level prediction.

use rand::rngs::mock::StepRng;
use rand::Rng;

use super::forward::{ac_forward, mcl_forward, soft_mask, Batch};
use super::mask::{anneal_s, retrieve_mask};
use super::model::KanModel;
use crate::autodiff::{Graph, Tensor};
use crate::data::{make_batches, Document, Label, TaskDataset};
use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::rnn::{argmax_rows, DenseHead, GruParams};
use crate::trainer::{train_until_stop, AdamState, EpochTrain, ParamRef, Phase, PhaseLog};

/// Gradients of one MCL batch, in the order KB tensors then head weight and bias.
pub struct MclGrads {
    pub loss: f64,
    pub grads: Vec<Tensor>,
}

/// Gradients of one AC batch: AC-RNN tensors then AC head weight and bias,
/// plus the gradient of row `t` of the task-embedding table.
pub struct AcGrads {
    pub loss: f64,
    pub grads: Vec<Tensor>,
    pub task_embedding: Vec<f64>,
}

fn finite(loss: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite(what()))
    }
}

/// Forward and backward pass of the MCL loss for task `t` under `mask`.
pub fn mcl_gradients<R: Rng + ?Sized>(
    model: &KanModel,
    t: usize,
    mask: &Tensor,
    batch: &Batch<'_>,
    rng: &mut R,
) -> Result<MclGrads> {
    let head = model.head(t)?;
    let mut g = Graph::new(true);
    let emb = g.constant(&model.embeddings);
    let kb = model.kb.bind(&mut g, true);
    let hv = head.bind(&mut g, true);
    let m = g.constant(mask);
    let out = mcl_forward(&mut g, emb, &kb, hv, m, batch, model.hp.dropout_keep, rng)?;
    let loss = g.softmax_cross_entropy(out.logits, &batch.labels)?;
    let value = finite(g.value(loss).item(), || format!("task {t} MCL loss"))?;
    g.backward(loss)?;
    let mut grads: Vec<Tensor> = kb.vars().iter().map(|&v| g.take_grad(v)).collect();
    grads.push(g.take_grad(hv.0));
    grads.push(g.take_grad(hv.1));
    Ok(MclGrads { loss: value, grads })
}

/// Forward and backward pass of the AC loss for task `t` at mask scale `s`.
pub fn ac_gradients<R: Rng + ?Sized>(
    model: &KanModel,
    t: usize,
    s: f64,
    batch: &Batch<'_>,
    rng: &mut R,
) -> Result<AcGrads> {
    if t >= model.num_task_embeddings() {
        return Err(Error::MissingTaskEmbedding(t));
    }
    let mut g = Graph::new(true);
    let emb = g.constant(&model.embeddings);
    let kb = model.kb.bind(&mut g, false);
    let ac = model.ac.bind(&mut g, true);
    let hv = model.ac_head.bind(&mut g, true);
    let table = g.param(&model.ac_emb);
    let mask = soft_mask(&mut g, table, t, s)?;
    let logits = ac_forward(&mut g, emb, &kb, &ac, hv, mask, batch, model.hp.dropout_keep, rng)?;
    let loss = g.softmax_cross_entropy(logits, &batch.labels)?;
    let value = finite(g.value(loss).item(), || format!("task {t} AC loss"))?;
    g.backward(loss)?;
    let mut grads: Vec<Tensor> = ac.vars().iter().map(|&v| g.take_grad(v)).collect();
    grads.push(g.take_grad(hv.0));
    grads.push(g.take_grad(hv.1));
    let task_embedding = g.take_grad(table).row(t).to_vec();
    Ok(AcGrads {
        loss: value,
        grads,
        task_embedding,
    })
}

impl KanModel {
    fn mcl_logits(&self, t: usize, mask: &Tensor, docs: &[Document]) -> Result<Tensor> {
        let head = self.head(t)?;
        let mut rows = Vec::with_capacity(docs.len() * 2);
        for chunk in docs.chunks(self.hp.batch_size) {
            let mut g = Graph::new(false);
            let emb = g.constant(&self.embeddings);
            let kb = self.kb.bind(&mut g, false);
            let hv = head.bind(&mut g, false);
            let m = g.constant(mask);
            let out = mcl_forward(&mut g, emb, &kb, hv, m, &Batch::of(chunk), 1.0, &mut StepRng::new(0, 0))?;
            rows.extend_from_slice(g.value(out.logits).data());
        }
        Tensor::new(vec![docs.len(), 2], rows)
    }

    /// Class predictions for task `t` with its retrieved mask and no dropout.
    pub fn predict_batch(&self, t: usize, docs: &[Document]) -> Result<Vec<Label>> {
        self.head(t)?;
        let mask = self.task_mask(t)?;
        let logits = self.mcl_logits(t, &mask.values, docs)?;
        Ok(argmax_rows(&logits)
            .into_iter()
            .map(|c| Label::from_class(c).expect("two classes"))
            .collect())
    }

    pub fn predict(&self, t: usize, doc: &Document) -> Result<Label> {
        Ok(self.predict_batch(t, std::slice::from_ref(doc))?[0])
    }

    /// Test-time accuracy of task `t` on `docs`.
    pub fn mcl_accuracy(&self, t: usize, docs: &[Document]) -> Result<f64> {
        let mask = self.task_mask(t)?;
        self.mcl_accuracy_with(t, &mask.values, docs)
    }

    fn mcl_accuracy_with(&self, t: usize, mask: &Tensor, docs: &[Document]) -> Result<f64> {
        if docs.is_empty() {
            return Err(Error::InvalidArgument("accuracy over no documents".into()));
        }
        let logits = self.mcl_logits(t, mask, docs)?;
        Ok(accuracy(&argmax_rows(&logits), docs))
    }

    /// Accuracy of the AC head for task `t`, using the binary mask retrieved at `s_max`.
    pub fn ac_accuracy(&self, t: usize, docs: &[Document]) -> Result<f64> {
        if docs.is_empty() {
            return Err(Error::InvalidArgument("accuracy over no documents".into()));
        }
        let mask = retrieve_mask(t, self.hp.s_max, &self.ac_emb)?;
        let mut preds = Vec::with_capacity(docs.len());
        for chunk in docs.chunks(self.hp.batch_size) {
            let mut g = Graph::new(false);
            let emb = g.constant(&self.embeddings);
            let kb = self.kb.bind(&mut g, false);
            let ac = self.ac.bind(&mut g, false);
            let hv = self.ac_head.bind(&mut g, false);
            let m = g.constant(&mask.values);
            let logits = ac_forward(&mut g, emb, &kb, &ac, hv, m, &Batch::of(chunk), 1.0, &mut StepRng::new(0, 0))?;
            preds.extend(argmax_rows(g.value(logits)));
        }
        Ok(accuracy(&preds, docs))
    }
}

fn accuracy(preds: &[usize], docs: &[Document]) -> f64 {
    let hits = preds
        .iter()
        .zip(docs)
        .filter(|(&p, d)| p == d.label.class())
        .count();
    hits as f64 / docs.len() as f64
}

/// MCL phase for task `t`: trains the KB-RNN and head `t` under a fixed mask.
pub struct MclPhase<'m> {
    model: &'m mut KanModel,
    data: &'m TaskDataset,
    t: usize,
    mask: Tensor,
    adam: AdamState,
}

impl<'m> MclPhase<'m> {
    pub fn new(model: &'m mut KanModel, t: usize, data: &'m TaskDataset) -> Result<Self> {
        if t > model.num_heads() {
            return Err(Error::UnknownTask(t));
        }
        model.ensure_head(t);
        let mask = model.task_mask(t)?.values;
        let mut sizes: Vec<usize> = model.kb.tensors().iter().map(|(_, x)| x.len()).collect();
        sizes.push(model.heads[t].weight.len());
        sizes.push(model.heads[t].bias.len());
        Ok(MclPhase {
            model,
            data,
            t,
            mask,
            adam: AdamState::new(&sizes),
        })
    }
}

impl Phase for MclPhase<'_> {
    type Snapshot = (GruParams, DenseHead);

    fn label(&self) -> String {
        format!("{} mcl", self.data.name)
    }

    fn train_epoch(&mut self, epoch: usize) -> Result<EpochTrain> {
        let t = self.t;
        let (seed, lr, bs) = (self.model.seed, self.model.hp.lr, self.model.hp.batch_size);
        let order_seed = rng::derive_seed(seed, &[tag::MCL_BATCHES, t as u64]);
        let batches = make_batches(self.data.train.len(), bs, order_seed, epoch);
        if batches.is_empty() {
            return Err(Error::NoTrainingBatches);
        }
        let mut drop = rng::stream(seed, &[tag::MCL_DROPOUT, t as u64, epoch as u64]);
        let mut total = 0.0;
        for idx in &batches {
            let batch = Batch::select(&self.data.train, idx);
            let out = mcl_gradients(self.model, t, &self.mask, &batch, &mut drop)?;
            total += out.loss;
            let KanModel { kb, heads, .. } = &mut *self.model;
            let head = &mut heads[t];
            let mut params: Vec<ParamRef<'_>> = kb
                .tensors_mut()
                .into_iter()
                .map(|(name, x)| ParamRef::new(format!("kb.gru.{name}"), x.data_mut()))
                .collect();
            params.push(ParamRef::new(format!("head.{t}.weight"), head.weight.data_mut()));
            params.push(ParamRef::new(format!("head.{t}.bias"), head.bias.data_mut()));
            let grads: Vec<&[f64]> = out.grads.iter().map(Tensor::data).collect();
            self.adam.step(&mut params, &grads, lr)?;
        }
        Ok(EpochTrain {
            mean_loss: total / batches.len() as f64,
            s_range: None,
        })
    }

    fn validate(&mut self) -> Result<f64> {
        self.model.mcl_accuracy_with(self.t, &self.mask, &self.data.valid)
    }

    fn snapshot(&self) -> Self::Snapshot {
        (self.model.kb.clone(), self.model.heads[self.t].clone())
    }

    fn restore(&mut self, (kb, head): Self::Snapshot) {
        self.model.kb = kb;
        self.model.heads[self.t] = head;
    }
}

/// AC phase for task `t`: trains the AC-RNN, the AC head and row `t` of the
/// task-embedding table against a frozen KB-RNN, annealing the mask scale
/// over every epoch.
pub struct AcPhase<'m> {
    model: &'m mut KanModel,
    data: &'m TaskDataset,
    t: usize,
    adam: AdamState,
}

impl<'m> AcPhase<'m> {
    pub fn new(model: &'m mut KanModel, t: usize, data: &'m TaskDataset) -> Result<Self> {
        model.ensure_task_embedding(t);
        let mut sizes: Vec<usize> = model.ac.tensors().iter().map(|(_, x)| x.len()).collect();
        sizes.push(model.ac_head.weight.len());
        sizes.push(model.ac_head.bias.len());
        sizes.push(model.hidden_dim());
        Ok(AcPhase {
            model,
            data,
            t,
            adam: AdamState::new(&sizes),
        })
    }
}

impl Phase for AcPhase<'_> {
    type Snapshot = (GruParams, DenseHead, Vec<f64>);

    fn label(&self) -> String {
        format!("{} ac", self.data.name)
    }

    fn train_epoch(&mut self, epoch: usize) -> Result<EpochTrain> {
        let t = self.t;
        let (seed, lr, bs, s_max) = (
            self.model.seed,
            self.model.hp.lr,
            self.model.hp.batch_size,
            self.model.hp.s_max,
        );
        let order_seed = rng::derive_seed(seed, &[tag::AC_BATCHES, t as u64]);
        let batches = make_batches(self.data.train.len(), bs, order_seed, epoch);
        if batches.is_empty() {
            return Err(Error::NoTrainingBatches);
        }
        let n = batches.len();
        let mut drop = rng::stream(seed, &[tag::AC_DROPOUT, t as u64, epoch as u64]);
        let mut total = 0.0;
        for (b, idx) in batches.iter().enumerate() {
            let s = anneal_s(b + 1, n, s_max)?;
            let batch = Batch::select(&self.data.train, idx);
            let out = ac_gradients(self.model, t, s, &batch, &mut drop)?;
            total += out.loss;
            let KanModel {
                ac, ac_head, ac_emb, ..
            } = &mut *self.model;
            let mut params: Vec<ParamRef<'_>> = ac
                .tensors_mut()
                .into_iter()
                .map(|(name, x)| ParamRef::new(format!("ac.gru.{name}"), x.data_mut()))
                .collect();
            params.push(ParamRef::new("ac.head.weight", ac_head.weight.data_mut()));
            params.push(ParamRef::new("ac.head.bias", ac_head.bias.data_mut()));
            params.push(ParamRef::new(format!("ac.emb[{t}]"), ac_emb.row_mut(t)));
            let mut grads: Vec<&[f64]> = out.grads.iter().map(Tensor::data).collect();
            grads.push(&out.task_embedding);
            self.adam.step(&mut params, &grads, lr)?;
        }
        Ok(EpochTrain {
            mean_loss: total / n as f64,
            s_range: Some((anneal_s(1, n, s_max)?, anneal_s(n, n, s_max)?)),
        })
    }

    fn validate(&mut self) -> Result<f64> {
        self.model.ac_accuracy(self.t, &self.data.valid)
    }

    fn snapshot(&self) -> Self::Snapshot {
        (
            self.model.ac.clone(),
            self.model.ac_head.clone(),
            self.model.ac_emb.row(self.t).to_vec(),
        )
    }

    fn restore(&mut self, (ac, head, row): Self::Snapshot) {
        self.model.ac = ac;
        self.model.ac_head = head;
        self.model.ac_emb.row_mut(self.t).copy_from_slice(&row);
    }
}

/// Trains KB-RNN and head `t` on `data` until early stopping.
pub fn mcl_train_task(model: &mut KanModel, t: usize, data: &TaskDataset) -> Result<PhaseLog> {
    let (patience, max_epochs) = (model.hp.patience, model.hp.max_epochs);
    train_until_stop(&mut MclPhase::new(model, t, data)?, patience, max_epochs)
}

/// Trains the accessibility component for task `t` on `data` until early stopping.
pub fn ac_train_task(model: &mut KanModel, t: usize, data: &TaskDataset) -> Result<PhaseLog> {
    let (patience, max_epochs) = (model.hp.patience, model.hp.max_epochs);
    train_until_stop(&mut AcPhase::new(model, t, data)?, patience, max_epochs)
}
