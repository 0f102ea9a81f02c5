//! VQA served by a live text endpoint.

use super::{images, info, text_arg, texts, FnTool};
use crate::backend::{complete, HttpBackend, HttpConfig};
use crate::registry::{param, CallContext, Mode, ParamType as P, Tool, ToolError, ToolInfo};
use crate::value::{Value, ValueTag};

/// Sends `Question: ...` plus the image handle to the endpoint.
pub struct HttpVqa {
    inner: FnTool,
}

impl HttpVqa {
    pub fn new(config: HttpConfig) -> Self {
        let backend = HttpBackend::new(config);
        let inner = FnTool::new(
            info(
                "VQA",
                "Answers a question about the image.",
                "image + question",
                "answer",
                "BLIP-2/PaLI-X",
                Mode::LiveHttp,
                vec![param("question", P::Text), param("image", P::Image)],
                ValueTag::Text,
            ),
            move |args, _| {
                let q = text_arg(&args[0])?;
                let (imgs, list) = images(&args[1])?;
                let mut out = Vec::with_capacity(imgs.len());
                for img in imgs {
                    let prompt = format!("Image: {}\nQuestion: {q}\nAnswer:", img.handle());
                    let raw = complete(&backend, &prompt).map_err(|e| ToolError::new(e.to_string()))?;
                    out.push(raw.trim().to_string());
                }
                Ok(texts(out, list))
            },
        );
        Self { inner }
    }
}

impl Tool for HttpVqa {
    fn info(&self) -> &ToolInfo {
        self.inner.info()
    }

    fn call(&self, args: &[Value], ctx: &mut CallContext<'_>) -> Result<Value, ToolError> {
        self.inner.call(args, ctx)
    }
}
