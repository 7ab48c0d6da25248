// Serve a session and drive it over the WebSocket stream.

use futures::{SinkExt, StreamExt};
use idea_balloons::api::{self, AppState, ServerConfig, ServerFrame};
use tokio_tungstenite::tungstenite::Message;

async fn next_frame<S>(ws: &mut S) -> Result<ServerFrame, Box<dyn std::error::Error>>
where
    S: StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        match ws.next().await.ok_or("stream closed")?? {
            Message::Text(text) => return Ok(serde_json::from_str(&text)?),
            _ => continue,
        }
    }
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let state = AppState::new(ServerConfig {
            realtime: false,
            ..ServerConfig::default()
        });
        let id = state.create(None, Some(5))?;
        let (addr, server) = api::spawn_app(state, "127.0.0.1:0").await?;
        println!("listening on {addr}, session {id}");

        let url = format!("ws://{addr}/sessions/{id}/stream?since=0");
        let (mut ws, _) = tokio_tungstenite::connect_async(url).await?;
        for (n, input) in [
            r#"{"kind":"StartSession"}"#,
            r#"{"kind":"IngestText","payload":{"text":"Create Rome","t":1.0}}"#,
        ]
        .iter()
        .enumerate()
        {
            let framed = input.replacen('{', &format!("{{\"request_id\":{n},"), 1);
            ws.send(Message::Text(framed.into())).await?;
            loop {
                match next_frame(&mut ws).await? {
                    ServerFrame::Event { event } => println!("event #{} {}", event.seq, event.kind.name()),
                    ServerFrame::Reply { request_id, reply } => {
                        println!("reply to {request_id:?}: {} events", reply.events.len());
                        break;
                    }
                    ServerFrame::Error { error, .. } => return Err(error.message.into()),
                }
            }
        }
        ws.close(None).await?;
        server.abort();
        Ok(())
    })
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
