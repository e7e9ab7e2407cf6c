bool remove(int key){
  while(true){
    struct node * pred = head;
    struct node * curr = head->next;
    while(curr->key < key){
      pred = curr;
      curr = curr->next;
    }
    if(curr->key != key)
      return false;
    @@delete::block1
    return true;
  }
}
